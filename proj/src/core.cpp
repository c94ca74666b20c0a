/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/core.h"

#include <algorithm>

namespace sbsim {

/* ============================ prefix cache ============================ */

PrefixCache::PrefixCache(std::vector<Tokens> probe_lens, Tokens budget_tokens)
    : probe_lens_(std::move(probe_lens)), budget_(budget_tokens) {
  std::sort(probe_lens_.begin(), probe_lens_.end());
}

std::uint64_t PrefixCache::hash_prefix(const std::vector<std::int32_t>& prefix,
                                       Tokens k) {
  // FNV-1a over the first k token ids, seeded with k so that different probe
  // lengths never collide onto the same key.
  std::uint64_t h = 14695981039346656037ull ^ static_cast<std::uint64_t>(k);
  for (Tokens i = 0; i < k; ++i) {
    auto v = static_cast<std::uint32_t>(prefix[static_cast<std::size_t>(i)]);
    for (int b = 0; b < 4; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return h;
}

Tokens PrefixCache::longest_hit(const std::vector<std::int32_t>& prefix,
                                Tokens prompt_len) const {
  Tokens best = 0;
  for (Tokens k : probe_lens_) {
    if (k > prompt_len || k > static_cast<Tokens>(prefix.size())) break;
    if (index_.count(hash_prefix(prefix, k)) != 0) best = k;
  }
  return best;
}

void PrefixCache::insert(const std::vector<std::int32_t>& prefix,
                         Tokens prompt_len) {
  if (budget_ <= 0) return;
  for (Tokens k : probe_lens_) {
    if (k > prompt_len || k > static_cast<Tokens>(prefix.size())) break;
    std::uint64_t key = hash_prefix(prefix, k);
    auto it = index_.find(key);
    if (it != index_.end()) {
      touch(key);
      continue;
    }
    lru_.emplace_front(key, k);
    index_[key] = lru_.begin();
    used_ += k;
  }
  evict_to_budget();
}

void PrefixCache::touch(std::uint64_t key) {
  auto it = index_.find(key);
  if (it == index_.end()) return;
  lru_.splice(lru_.begin(), lru_, it->second);
  index_[key] = lru_.begin();
}

void PrefixCache::evict_to_budget() {
  while (used_ > budget_ && !lru_.empty()) {
    auto& [key, k] = lru_.back();
    used_ -= k;
    index_.erase(key);
    lru_.pop_back();
  }
}

/* ============================ cluster ============================ */

void validate(const ClusterConfig& config) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(config.n_instances_prefill >= 1, "n_instances_prefill must be >= 1");
  require(config.n_instances_decode >= 1, "n_instances_decode must be >= 1");
  require(config.dp_degree >= 1, "dp_degree must be >= 1");
  require(config.dp_degree_decode >= 0, "dp_degree_decode must be >= 0");
  require(config.c_chunk >= 1, "c_chunk must be >= 1");
  require(config.t_default_s > 0, "t_default_s must be > 0");
  require(config.w_size >= 1, "w_size must be >= 1");
  require(config.l_net_s >= 0, "l_net_s must be >= 0");
  require(config.n_limit >= 0, "n_limit must be >= 0");
  require(config.iqr_k >= 0, "iqr_k must be >= 0");
  require(config.watchdog_multiplier > 0, "watchdog_multiplier must be > 0");
  require(config.engine.prefill_base_s >= 0, "prefill_base_s must be >= 0");
  require(config.engine.prefill_per_token_s >= 0,
          "prefill_per_token_s must be >= 0");
  require(config.engine.decode_base_s >= 0, "decode_base_s must be >= 0");
  require(config.engine.decode_per_request_s >= 0,
          "decode_per_request_s must be >= 0");
  require(config.engine.decode_per_kv_token_s >= 0,
          "decode_per_kv_token_s must be >= 0");
  require(config.decode_tokens_per_step >= 1,
          "decode_tokens_per_step must be >= 1");
  require(config.decode_max_batch_per_dp >= 0,
          "decode_max_batch_per_dp must be >= 0");
  if (config.cache.enabled) {
    require(!config.cache.probe_lens.empty(),
            "cache.probe_lens must be non-empty when the cache is enabled");
    for (Tokens k : config.cache.probe_lens)
      require(k >= 1, "cache.probe_lens entries must be >= 1");
    require(config.cache.budget_tokens >= 1,
            "cache.budget_tokens must be >= 1 when the cache is enabled");
  }
}

std::vector<InstanceState*> Cluster::prefill_pool() {
  std::vector<InstanceState*> out;
  for (auto& inst : instances)
    if (inst.role == InstanceRole::kPrefill) out.push_back(&inst);
  return out;
}

std::vector<InstanceState*> Cluster::decode_pool() {
  std::vector<InstanceState*> out;
  for (auto& inst : instances)
    if (inst.role == InstanceRole::kDecode) out.push_back(&inst);
  return out;
}

Cluster new_cluster(const ClusterConfig& config) {
  validate(config);
  Cluster cluster;

  auto make_instance = [&](int id, InstanceRole role, int dp_degree) {
    InstanceState inst;
    inst.instance_id = id;
    inst.role = role;
    inst.dp_units.resize(static_cast<std::size_t>(dp_degree));
    for (int d = 0; d < dp_degree; ++d) {
      auto& dp = inst.dp_units[static_cast<std::size_t>(d)];
      dp.dp_id = DpId{id, d};
      dp.c_chunk = config.c_chunk;
      if (config.cache.enabled)
        dp.cache = PrefixCache(config.cache.probe_lens,
                               config.cache.budget_tokens);
    }
    inst.pass_content.resize(static_cast<std::size_t>(dp_degree));
    inst.pass_loads.assign(static_cast<std::size_t>(dp_degree), 0);
    return inst;
  };

  int id = 0;
  for (int i = 0; i < config.n_instances_prefill; ++i)
    cluster.instances.push_back(
        make_instance(id++, InstanceRole::kPrefill, config.dp_degree));
  for (int i = 0; i < config.n_instances_decode; ++i)
    cluster.instances.push_back(
        make_instance(id++, InstanceRole::kDecode,
                      config.effective_dp_decode()));

  auto& sched = cluster.scheduler;
  sched.w_size = config.w_size;
  sched.t_default = seconds_to_ns(config.t_default_s);
  sched.t_fwd_bar = sched.t_default;
  sched.l_net = seconds_to_ns(config.l_net_s);
  sched.n_active = config.n_instances_prefill;
  sched.i_opt = (sched.t_fwd_bar + sched.l_net) / sched.n_active;
  return cluster;
}

}  // namespace sbsim
