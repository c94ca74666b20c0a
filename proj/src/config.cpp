/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace sbsim {
namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
  throw ConfigError(origin + ": " + what);
}

// Rejects keys outside the allowed set so typos fail loudly instead of
// silently falling back to defaults.
void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed,
                const std::string& origin) {
  if (!obj.is_object()) {
    fail(origin, path + " must be an object");
  }
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      fail(origin, "unknown key \"" + path + "." + item.key() + "\"");
    }
  }
}

std::int64_t get_int(const json& obj, const char* key, std::int64_t fallback,
                     const std::string& path, const std::string& origin) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    fail(origin, path + "." + key + " must be an integer");
  }
  return v.get<std::int64_t>();
}

double get_num(const json& obj, const char* key, double fallback,
               const std::string& path, const std::string& origin) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    fail(origin, path + "." + key + " must be a number");
  }
  return v.get<double>();
}

bool get_bool(const json& obj, const char* key, bool fallback,
              const std::string& path, const std::string& origin) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    fail(origin, path + "." + key + " must be a boolean");
  }
  return v.get<bool>();
}

std::string get_str(const json& obj, const char* key, std::string fallback,
                    const std::string& path, const std::string& origin) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) {
    fail(origin, path + "." + key + " must be a string");
  }
  return v.get<std::string>();
}

LengthSpec parse_length(const json& obj, const std::string& path,
                        const LengthSpec& fallback, const std::string& origin) {
  check_keys(obj, path, {"dist", "value", "min", "max", "mu", "sigma"}, origin);
  LengthSpec spec = fallback;
  std::string dist = get_str(obj, "dist", "", path, origin);
  if (dist == "constant") {
    spec.dist = LengthDist::kConstant;
  } else if (dist == "uniform") {
    spec.dist = LengthDist::kUniformInt;
  } else if (dist == "lognormal") {
    spec.dist = LengthDist::kLognormalClamped;
  } else if (!dist.empty()) {
    fail(origin, path + ".dist must be constant, uniform, or lognormal");
  }
  spec.value = get_int(obj, "value", spec.value, path, origin);
  spec.min = get_int(obj, "min", spec.min, path, origin);
  spec.max = get_int(obj, "max", spec.max, path, origin);
  spec.mu = get_num(obj, "mu", spec.mu, path, origin);
  spec.sigma = get_num(obj, "sigma", spec.sigma, path, origin);
  return spec;
}

void parse_cluster(const json& obj, ClusterConfig& cluster,
                   const std::string& origin) {
  check_keys(obj, "cluster",
             {"n_instances_prefill", "n_instances_decode", "dp_degree",
              "dp_degree_decode", "c_chunk", "t_default_s", "w_size", "l_net_s",
              "n_limit", "iqr_k", "watchdog_multiplier", "engine",
              "decode_tokens_per_step", "decode_max_batch_per_dp", "cache"},
             origin);
  cluster.n_instances_prefill = static_cast<int>(get_int(
      obj, "n_instances_prefill", cluster.n_instances_prefill, "cluster",
      origin));
  cluster.n_instances_decode = static_cast<int>(get_int(
      obj, "n_instances_decode", cluster.n_instances_decode, "cluster",
      origin));
  cluster.dp_degree = static_cast<int>(
      get_int(obj, "dp_degree", cluster.dp_degree, "cluster", origin));
  cluster.dp_degree_decode = static_cast<int>(get_int(
      obj, "dp_degree_decode", cluster.dp_degree_decode, "cluster", origin));
  cluster.c_chunk = get_int(obj, "c_chunk", cluster.c_chunk, "cluster",
                            origin);
  cluster.t_default_s =
      get_num(obj, "t_default_s", cluster.t_default_s, "cluster", origin);
  cluster.w_size = static_cast<int>(
      get_int(obj, "w_size", cluster.w_size, "cluster", origin));
  cluster.l_net_s = get_num(obj, "l_net_s", cluster.l_net_s, "cluster",
                            origin);
  cluster.n_limit = static_cast<int>(
      get_int(obj, "n_limit", cluster.n_limit, "cluster", origin));
  cluster.iqr_k = get_num(obj, "iqr_k", cluster.iqr_k, "cluster", origin);
  cluster.watchdog_multiplier = get_num(
      obj, "watchdog_multiplier", cluster.watchdog_multiplier, "cluster",
      origin);
  cluster.decode_tokens_per_step = get_int(
      obj, "decode_tokens_per_step", cluster.decode_tokens_per_step, "cluster",
      origin);
  cluster.decode_max_batch_per_dp = static_cast<int>(get_int(
      obj, "decode_max_batch_per_dp", cluster.decode_max_batch_per_dp,
      "cluster", origin));
  if (obj.contains("engine")) {
    const json& eng = obj.at("engine");
    check_keys(eng, "cluster.engine",
               {"prefill_base_s", "prefill_per_token_s", "decode_base_s",
                "decode_per_request_s", "decode_per_kv_token_s"},
               origin);
    EngineCoefficients& c = cluster.engine;
    c.prefill_base_s = get_num(eng, "prefill_base_s", c.prefill_base_s,
                               "cluster.engine", origin);
    c.prefill_per_token_s = get_num(eng, "prefill_per_token_s",
                                    c.prefill_per_token_s, "cluster.engine",
                                    origin);
    c.decode_base_s = get_num(eng, "decode_base_s", c.decode_base_s,
                              "cluster.engine", origin);
    c.decode_per_request_s = get_num(eng, "decode_per_request_s",
                                     c.decode_per_request_s, "cluster.engine",
                                     origin);
    c.decode_per_kv_token_s = get_num(eng, "decode_per_kv_token_s",
                                      c.decode_per_kv_token_s, "cluster.engine",
                                      origin);
  }
  if (obj.contains("cache")) {
    const json& cache = obj.at("cache");
    check_keys(cache, "cluster.cache", {"enabled", "probe_lens",
                                        "budget_tokens"},
               origin);
    cluster.cache.enabled = get_bool(cache, "enabled", cluster.cache.enabled,
                                     "cluster.cache", origin);
    cluster.cache.budget_tokens = get_int(cache, "budget_tokens",
                                          cluster.cache.budget_tokens,
                                          "cluster.cache", origin);
    if (cache.contains("probe_lens")) {
      const json& lens = cache.at("probe_lens");
      if (!lens.is_array()) {
        fail(origin, "cluster.cache.probe_lens must be an array");
      }
      cluster.cache.probe_lens.clear();
      for (const json& v : lens) {
        if (!v.is_number_integer()) {
          fail(origin, "cluster.cache.probe_lens entries must be integers");
        }
        cluster.cache.probe_lens.push_back(v.get<Tokens>());
      }
    }
  }
}

void parse_workload(const json& obj, WorkloadSpec& workload,
                    double& reference_peak_qps, const std::string& origin) {
  check_keys(obj, "workload",
             {"process", "rate_qps", "duration_s", "prompt", "output",
              "shared_prefix_fraction", "prefix_pool", "prefix_len",
              "initial_burst", "reference_peak_qps"},
             origin);
  std::string process = get_str(obj, "process", "", "workload", origin);
  if (process == "poisson") {
    workload.process = ArrivalProcess::kPoisson;
  } else if (process == "uniform") {
    workload.process = ArrivalProcess::kUniform;
  } else if (process == "uniform_jitter") {
    workload.process = ArrivalProcess::kUniformJitter;
  } else if (!process.empty()) {
    fail(origin, "workload.process must be poisson, uniform, or "
                 "uniform_jitter");
  }
  workload.rate_qps = get_num(obj, "rate_qps", workload.rate_qps, "workload",
                              origin);
  workload.duration_s = get_num(obj, "duration_s", workload.duration_s,
                                "workload", origin);
  if (obj.contains("prompt")) {
    workload.prompt = parse_length(obj.at("prompt"), "workload.prompt",
                                   workload.prompt, origin);
  }
  if (obj.contains("output")) {
    workload.output = parse_length(obj.at("output"), "workload.output",
                                   workload.output, origin);
  }
  workload.shared_prefix_fraction = get_num(
      obj, "shared_prefix_fraction", workload.shared_prefix_fraction,
      "workload", origin);
  workload.prefix_pool = static_cast<int>(
      get_int(obj, "prefix_pool", workload.prefix_pool, "workload", origin));
  workload.prefix_len = get_int(obj, "prefix_len", workload.prefix_len,
                                "workload", origin);
  workload.initial_burst = static_cast<int>(get_int(
      obj, "initial_burst", workload.initial_burst, "workload", origin));
  reference_peak_qps = get_num(obj, "reference_peak_qps", reference_peak_qps,
                               "workload", origin);
}

void parse_scheduler(const json& obj, ExperimentConfig& config,
                     const std::string& origin) {
  check_keys(obj, "scheduler", {"policy", "prefill_mode", "decode_policy"},
             origin);
  std::string policy = get_str(obj, "policy", "", "scheduler", origin);
  if (policy == "sbs") {
    config.policy = SchedulerPolicy::kSbs;
  } else if (policy == "immediate") {
    config.policy = SchedulerPolicy::kImmediate;
  } else if (policy == "round_robin") {
    config.policy = SchedulerPolicy::kRoundRobin;
  } else if (policy == "least_outstanding") {
    config.policy = SchedulerPolicy::kLeastOutstanding;
  } else if (!policy.empty()) {
    fail(origin, "scheduler.policy must be sbs, immediate, round_robin, or "
                 "least_outstanding");
  }
  std::string mode = get_str(obj, "prefill_mode", "", "scheduler", origin);
  if (mode == "basic") {
    config.prefill_mode = AllocMode::kBasic;
  } else if (mode == "cache_aware") {
    config.prefill_mode = AllocMode::kCacheAware;
  } else if (!mode.empty()) {
    fail(origin, "scheduler.prefill_mode must be basic or cache_aware");
  }
  std::string decode = get_str(obj, "decode_policy", "", "scheduler", origin);
  if (decode == "iqr") {
    config.decode_policy = DecodePolicy::kIqr;
  } else if (decode == "random") {
    config.decode_policy = DecodePolicy::kRandom;
  } else if (decode == "round_robin") {
    config.decode_policy = DecodePolicy::kRoundRobin;
  } else if (!decode.empty()) {
    fail(origin, "scheduler.decode_policy must be iqr, random, or "
                 "round_robin");
  }
}

void parse_sim(const json& obj, SimOptions& sim, const std::string& origin) {
  check_keys(obj, "sim", {"seed", "warmup_fraction", "trace"}, origin);
  std::int64_t seed = get_int(obj, "seed", static_cast<std::int64_t>(sim.seed),
                              "sim", origin);
  if (seed < 0) fail(origin, "sim.seed must be non-negative");
  sim.seed = static_cast<std::uint64_t>(seed);
  sim.warmup_fraction = get_num(obj, "warmup_fraction", sim.warmup_fraction,
                                "sim", origin);
  if (sim.warmup_fraction < 0.0 || sim.warmup_fraction >= 1.0) {
    fail(origin, "sim.warmup_fraction must be in [0, 1)");
  }
  sim.trace = get_bool(obj, "trace", sim.trace, "sim", origin);
}

void parse_faults(const json& obj, FaultPlan& faults,
                  const std::string& origin) {
  check_keys(obj, "faults", {"drop_end_forward", "dead", "topology"}, origin);
  if (obj.contains("drop_end_forward")) {
    const json& arr = obj.at("drop_end_forward");
    if (!arr.is_array()) {
      fail(origin, "faults.drop_end_forward must be an array");
    }
    for (const json& entry : arr) {
      check_keys(entry, "faults.drop_end_forward[]",
                 {"instance", "from_s", "until_s"}, origin);
      DropEndForwardFault fault;
      fault.instance = static_cast<int>(
          get_int(entry, "instance", -1, "faults.drop_end_forward[]", origin));
      fault.from_s = get_num(entry, "from_s", 0.0, "faults.drop_end_forward[]",
                             origin);
      fault.until_s = get_num(entry, "until_s", fault.until_s,
                              "faults.drop_end_forward[]", origin);
      faults.drop_end_forward.push_back(fault);
    }
  }
  if (obj.contains("dead")) {
    const json& arr = obj.at("dead");
    if (!arr.is_array()) fail(origin, "faults.dead must be an array");
    for (const json& entry : arr) {
      check_keys(entry, "faults.dead[]", {"instance", "time_s"}, origin);
      DeadFault fault;
      fault.instance = static_cast<int>(
          get_int(entry, "instance", 0, "faults.dead[]", origin));
      fault.time_s = get_num(entry, "time_s", 0.0, "faults.dead[]", origin);
      faults.dead.push_back(fault);
    }
  }
  if (obj.contains("topology")) {
    const json& arr = obj.at("topology");
    if (!arr.is_array()) fail(origin, "faults.topology must be an array");
    for (const json& entry : arr) {
      check_keys(entry, "faults.topology[]", {"instance", "time_s", "healthy"},
                 origin);
      TopologyFault fault;
      fault.instance = static_cast<int>(
          get_int(entry, "instance", 0, "faults.topology[]", origin));
      fault.time_s = get_num(entry, "time_s", 0.0, "faults.topology[]",
                             origin);
      fault.healthy = get_bool(entry, "healthy", false, "faults.topology[]",
                               origin);
      faults.topology.push_back(fault);
    }
  }
}

const char* process_name(ArrivalProcess process) {
  switch (process) {
    case ArrivalProcess::kPoisson: return "poisson";
    case ArrivalProcess::kUniform: return "uniform";
    case ArrivalProcess::kUniformJitter: return "uniform_jitter";
  }
  return "?";
}

const char* dist_name(LengthDist dist) {
  switch (dist) {
    case LengthDist::kConstant: return "constant";
    case LengthDist::kUniformInt: return "uniform";
    case LengthDist::kLognormalClamped: return "lognormal";
  }
  return "?";
}

ordered_json length_json(const LengthSpec& spec) {
  ordered_json out;
  out["dist"] = dist_name(spec.dist);
  switch (spec.dist) {
    case LengthDist::kConstant:
      out["value"] = spec.value;
      break;
    case LengthDist::kUniformInt:
      out["min"] = spec.min;
      out["max"] = spec.max;
      break;
    case LengthDist::kLognormalClamped:
      out["mu"] = spec.mu;
      out["sigma"] = spec.sigma;
      out["min"] = spec.min;
      out["max"] = spec.max;
      break;
  }
  return out;
}

}  // namespace

const char* policy_name(SchedulerPolicy policy) {
  switch (policy) {
    case SchedulerPolicy::kSbs: return "sbs";
    case SchedulerPolicy::kImmediate: return "immediate";
    case SchedulerPolicy::kRoundRobin: return "round_robin";
    case SchedulerPolicy::kLeastOutstanding: return "least_outstanding";
  }
  return "?";
}

const char* decode_policy_name(DecodePolicy policy) {
  switch (policy) {
    case DecodePolicy::kIqr: return "iqr";
    case DecodePolicy::kRandom: return "random";
    case DecodePolicy::kRoundRobin: return "round_robin";
  }
  return "?";
}

const char* alloc_mode_name(AllocMode mode) {
  switch (mode) {
    case AllocMode::kBasic: return "basic";
    case AllocMode::kCacheAware: return "cache_aware";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann already reports line and column in what().
    fail(origin, e.what());
  }
  check_keys(root, "$", {"cluster", "workload", "scheduler", "sim", "faults"},
             origin);
  ExperimentConfig config;
  if (root.contains("cluster")) {
    parse_cluster(root.at("cluster"), config.cluster, origin);
  }
  if (root.contains("workload")) {
    parse_workload(root.at("workload"), config.workload,
                   config.reference_peak_qps, origin);
  }
  if (root.contains("scheduler")) {
    parse_scheduler(root.at("scheduler"), config, origin);
  }
  if (root.contains("sim")) {
    parse_sim(root.at("sim"), config.sim, origin);
  }
  if (root.contains("faults")) {
    parse_faults(root.at("faults"), config.faults, origin);
  }
  validate(config.cluster);
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(path + ": cannot open file");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

ordered_json resolved_json(const ExperimentConfig& config) {
  const ClusterConfig& cl = config.cluster;
  const WorkloadSpec& wl = config.workload;
  ordered_json out;
  ordered_json cluster;
  cluster["n_instances_prefill"] = cl.n_instances_prefill;
  cluster["n_instances_decode"] = cl.n_instances_decode;
  cluster["dp_degree"] = cl.dp_degree;
  cluster["dp_degree_decode"] = cl.effective_dp_decode();
  cluster["c_chunk"] = cl.c_chunk;
  cluster["t_default_s"] = cl.t_default_s;
  cluster["w_size"] = cl.w_size;
  cluster["l_net_s"] = cl.l_net_s;
  cluster["n_limit"] = cl.n_limit;
  cluster["iqr_k"] = cl.iqr_k;
  cluster["watchdog_multiplier"] = cl.watchdog_multiplier;
  ordered_json engine;
  engine["prefill_base_s"] = cl.engine.prefill_base_s;
  engine["prefill_per_token_s"] = cl.engine.prefill_per_token_s;
  engine["decode_base_s"] = cl.engine.decode_base_s;
  engine["decode_per_request_s"] = cl.engine.decode_per_request_s;
  engine["decode_per_kv_token_s"] = cl.engine.decode_per_kv_token_s;
  cluster["engine"] = engine;
  cluster["decode_tokens_per_step"] = cl.decode_tokens_per_step;
  cluster["decode_max_batch_per_dp"] = cl.decode_max_batch_per_dp;
  ordered_json cache;
  cache["enabled"] = cl.cache.enabled;
  cache["probe_lens"] = cl.cache.probe_lens;
  cache["budget_tokens"] = cl.cache.budget_tokens;
  cluster["cache"] = cache;
  out["cluster"] = cluster;

  ordered_json workload;
  workload["process"] = process_name(wl.process);
  workload["rate_qps"] = wl.rate_qps;
  workload["duration_s"] = wl.duration_s;
  workload["prompt"] = length_json(wl.prompt);
  workload["output"] = length_json(wl.output);
  workload["shared_prefix_fraction"] = wl.shared_prefix_fraction;
  workload["prefix_pool"] = wl.prefix_pool;
  workload["prefix_len"] = wl.prefix_len;
  workload["initial_burst"] = wl.initial_burst;
  if (config.reference_peak_qps > 0.0) {
    workload["reference_peak_qps"] = config.reference_peak_qps;
  }
  out["workload"] = workload;

  ordered_json scheduler;
  scheduler["policy"] = policy_name(config.policy);
  scheduler["prefill_mode"] = alloc_mode_name(config.prefill_mode);
  scheduler["decode_policy"] = decode_policy_name(config.decode_policy);
  out["scheduler"] = scheduler;

  ordered_json sim;
  sim["seed"] = config.sim.seed;
  sim["warmup_fraction"] = config.sim.warmup_fraction;
  sim["trace"] = config.sim.trace;
  out["sim"] = sim;

  ordered_json faults;
  faults["drop_end_forward"] = ordered_json::array();
  for (const DropEndForwardFault& fault : config.faults.drop_end_forward) {
    ordered_json e;
    e["instance"] = fault.instance;
    e["from_s"] = fault.from_s;
    e["until_s"] = std::isfinite(fault.until_s) ? ordered_json(fault.until_s)
                                                : ordered_json("inf");
    faults["drop_end_forward"].push_back(e);
  }
  faults["dead"] = ordered_json::array();
  for (const DeadFault& fault : config.faults.dead) {
    ordered_json e;
    e["instance"] = fault.instance;
    e["time_s"] = fault.time_s;
    faults["dead"].push_back(e);
  }
  faults["topology"] = ordered_json::array();
  for (const TopologyFault& fault : config.faults.topology) {
    ordered_json e;
    e["instance"] = fault.instance;
    e["time_s"] = fault.time_s;
    e["healthy"] = fault.healthy;
    faults["topology"].push_back(e);
  }
  out["faults"] = faults;
  return out;
}

}  // namespace sbsim
