/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbsim/core.h"
#include "sbsim/prefill_alloc.h"
#include "sbsim/workload.h"

namespace sbsim {

enum class SchedulerPolicy {
  kSbs,               // staggered interval dispatch with batched allocation
  kImmediate,         // dispatch on arrival, rotating instances and DPs
  kRoundRobin,        // alias of immediate rotation
  kLeastOutstanding,  // dispatch on arrival to the least-loaded DP
};

enum class DecodePolicy { kIqr, kRandom, kRoundRobin };

const char* policy_name(SchedulerPolicy policy);
const char* decode_policy_name(DecodePolicy policy);
const char* alloc_mode_name(AllocMode mode);

// Window during which EndForward notifications from an instance are lost on
// the way to the scheduler (the pass itself still completes). instance -1
// matches every instance.
struct DropEndForwardFault {
  int instance = -1;
  double from_s = 0.0;
  double until_s = std::numeric_limits<double>::infinity();
};

// Hard fault: from time_s the instance stops executing and responding.
struct DeadFault {
  int instance = 0;
  double time_s = 0.0;
};

// Announced topology change (health probe verdict) delivered as an event.
struct TopologyFault {
  int instance = 0;
  double time_s = 0.0;
  bool healthy = false;
};

struct FaultPlan {
  std::vector<DropEndForwardFault> drop_end_forward;
  std::vector<DeadFault> dead;
  std::vector<TopologyFault> topology;
};

struct SimOptions {
  std::uint64_t seed = 1;
  double warmup_fraction = 0.1;  // slice of the run excluded from aggregates
  bool trace = false;
};

struct ExperimentConfig {
  ClusterConfig cluster;
  WorkloadSpec workload;
  double reference_peak_qps = 0.0;  // anchor for load sweeps, 0 = unset
  SchedulerPolicy policy = SchedulerPolicy::kSbs;
  AllocMode prefill_mode = AllocMode::kBasic;
  DecodePolicy decode_policy = DecodePolicy::kIqr;
  SimOptions sim;
  FaultPlan faults;
};

// Parses a JSON experiment config. Unknown keys anywhere are errors naming
// the offending path; parse errors carry nlohmann's line/column diagnostic.
// Throws ConfigError.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin);
ExperimentConfig load_config_file(const std::string& path);

// Fully resolved config (defaults materialized) with stable key order, as
// echoed into summary.json.
nlohmann::ordered_json resolved_json(const ExperimentConfig& config);

}  // namespace sbsim
