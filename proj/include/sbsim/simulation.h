/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbsim/config.h"
#include "sbsim/core.h"
#include "sbsim/engine_model.h"
#include "sbsim/metrics.h"

namespace sbsim {

struct SimulationResult {
  Aggregates aggregates;
  RequestTable requests;      // final request states
  MetricsCollector metrics;   // run records for report files
  std::uint64_t workload_digest = 0;
  TimeNs horizon = 0;
  std::string trace;          // event trace, empty unless sim.trace
};

// Runs one experiment end to end: generates the workload, plays every event
// through the cluster, validates request-timestamp invariants, and returns
// the aggregate view. Throws ConfigError for bad configs and
// std::logic_error if an internal invariant breaks.
SimulationResult run_experiment(const ExperimentConfig& config);

// Writes requests.csv, passes.csv, kvband.csv, control.csv, summary.json
// (and trace.tsv when present) under out_dir, creating it if needed. Every
// file is byte-deterministic for identical runs.
void write_outputs(const ExperimentConfig& config,
                   const SimulationResult& result, const std::string& out_dir);

nlohmann::ordered_json aggregates_json(const Aggregates& agg);
nlohmann::ordered_json summary_json(const ExperimentConfig& config,
                                    const SimulationResult& result);

/* ============================ peak search ============================ */

struct PeakProbe {
  double rate_qps = 0.0;
  double ttft_mean_s = 0.0;
  std::size_t window_requests = 0;
  bool feasible = false;
};

struct PeakResult {
  bool attainable = false;
  double peak_qps = 0.0;
  std::vector<PeakProbe> probes;  // in evaluation order
};

// Highest arrival rate whose steady-state mean TTFT stays within the SLO,
// found by bisection over full simulation runs at the configured resolution.
// A rate is feasible when the post-warm-up window saw at least ten
// completions and their mean TTFT is within slo_ttft_s. Returns
// attainable=false when even rate_min misses the SLO; saturates at rate_max
// when everything fits.
PeakResult find_peak_qps(const ExperimentConfig& base, double slo_ttft_s,
                         double rate_min, double rate_max, double resolution);

}  // namespace sbsim
