/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/prefill_alloc.h"

#include <algorithm>
#include <numeric>

namespace sbsim {

Tokens cache_hit_len(const Request& req, const DpPlan& dp) {
  if (dp.cache == nullptr) return 0;
  return dp.cache->longest_hit(req.prefix_tokens, req.prompt_len);
}

Tokens capacity_after(const Request& req, const DpPlan& dp, AllocMode mode) {
  Tokens charge = req.prompt_len;
  if (mode == AllocMode::kCacheAware) charge -= cache_hit_len(req, dp);
  return dp.c_avail - charge;
}

void greedy_dispatch(std::span<Request* const> queue, std::vector<DpPlan>& dps,
                     AllocMode mode, std::vector<Placement>& mapping,
                     std::vector<Request*>& deferred) {
  // Process longest prompts first so large requests land while headroom is
  // widest; ties fall back to arrival order (request id).
  std::vector<std::size_t> order(queue.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&queue](std::size_t a, std::size_t b) {
                     if (queue[a]->prompt_len != queue[b]->prompt_len)
                       return queue[a]->prompt_len > queue[b]->prompt_len;
                     return queue[a]->id < queue[b]->id;
                   });

  std::vector<bool> placed(queue.size(), false);
  for (std::size_t pos : order) {
    Request* req = queue[pos];
    int best = -1;
    Tokens best_after = 0;
    for (std::size_t d = 0; d < dps.size(); ++d) {
      Tokens after = capacity_after(*req, dps[d], mode);
      if (best < 0 || after > best_after) {
        best = static_cast<int>(d);
        best_after = after;
      }
    }
    // A unit already at or below zero headroom accepts nothing more; the
    // request waits for the next cycle.
    if (best < 0 || dps[static_cast<std::size_t>(best)].c_avail <= 0) continue;
    dps[static_cast<std::size_t>(best)].c_avail = best_after;
    mapping.emplace_back(req, dps[static_cast<std::size_t>(best)].dp_index);
    placed[pos] = true;
  }

  for (std::size_t i = 0; i < queue.size(); ++i)
    if (!placed[i]) deferred.push_back(queue[i]);
}

AllocationResult allocate_batch(std::span<Request* const> q_pending,
                                std::span<Request* const> q_new,
                                std::vector<DpPlan>& dps, int n_limit,
                                AllocMode mode) {
  AllocationResult result;

  std::vector<Request*> deferred_pending;
  greedy_dispatch(q_pending, dps, mode, result.mapping, deferred_pending);
  std::vector<Request*> deferred_new;
  greedy_dispatch(q_new, dps, mode, result.mapping, deferred_new);

  // Overload handling: deferred requests age by one cycle; the ones past the
  // limit are handed to flow control, the rest carry over with requests from
  // earlier cycles still ahead of newer ones.
  auto age = [&](std::vector<Request*>& queue) {
    for (Request* req : queue) {
      req->wait_cycles += 1;
      if (req->wait_cycles > n_limit)
        result.throttled.push_back(req);
      else
        result.deferred.push_back(req);
    }
  };
  age(deferred_pending);
  age(deferred_new);
  result.flow_control = !result.throttled.empty();
  return result;
}

}  // namespace sbsim
