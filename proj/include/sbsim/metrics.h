/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sbsim/core.h"
#include "sbsim/engine_model.h"

namespace sbsim {

enum class DispatchPolicyKind { kImmediate, kStaggered };

// Closed-form expected wait for the idealized cluster of n instances with a
// deterministic pass time t_fwd: immediate dispatch leaves requests waiting
// out the residual of the pass running where they land (t_fwd / 2 on
// average, independent of n); staggered dispatch buffers them for the next
// interval boundary instead (t_fwd / (2 n)).
double expected_wait(DispatchPolicyKind policy, double t_fwd_s,
                     int n_instances);

// Mean over DP units of min(assigned, c_chunk) / c_chunk.
double chunk_utilization(std::span<const Tokens> dp_assigned, Tokens c_chunk);

struct KvBand {
  double mean = 0.0;
  double sigma = 0.0;  // population standard deviation
  double lo = 0.0;     // mean - sigma
  double hi = 0.0;     // mean + sigma
  Tokens min = 0;
  Tokens max = 0;
};

KvBand kv_band(std::span<const Tokens> kv_loads);

/* ============================ run records ============================ */

struct PassSample {
  TimeNs time = 0;
  int instance_id = 0;
  std::vector<Tokens> dp_assigned;
  double utilization = 0.0;
};

struct KvSample {
  TimeNs time = 0;
  KvBand band;
};

struct ControlSample {
  TimeNs time = 0;
  TimeNs i_opt = 0;
  TimeNs t_fwd_bar = 0;
  int n_active = 0;
};

struct StepSample {
  TimeNs time = 0;
  Tokens generated = 0;
};

struct Aggregates {
  std::size_t generated = 0;
  std::size_t completed = 0;
  std::size_t throttled = 0;
  std::size_t in_flight = 0;
  std::size_t window_requests = 0;  // completed requests inside the window

  double ttft_mean_s = 0.0;
  double ttft_p50_s = 0.0;
  double ttft_p95_s = 0.0;
  double scheduler_wait_mean_s = 0.0;
  double device_wait_mean_s = 0.0;
  double total_wait_mean_s = 0.0;

  std::size_t passes = 0;
  double chunk_util_mean = 0.0;

  std::size_t decode_steps = 0;
  std::uint64_t output_tokens = 0;
  double output_tokens_per_s = 0.0;
  double kv_mean_time_avg = 0.0;
  double kv_sigma_time_avg = 0.0;

  double completed_per_s = 0.0;

  std::uint64_t watchdog_fires = 0;
  std::uint64_t dropped_end_forwards = 0;
  std::uint64_t rejected_samples = 0;
  std::uint64_t deferrals = 0;
  std::uint64_t flow_control_events = 0;
  std::uint64_t mask_events = 0;
  std::uint64_t fallback_events = 0;

  double warmup_cutoff_s = 0.0;
  double duration_s = 0.0;
};

// Accumulates run records and produces the aggregate view plus the four
// deterministic report files. Aggregates cover the post-warm-up window so
// cold-start transients never skew steady-state statistics.
class MetricsCollector {
 public:
  void record_pass(const PassBegin& begin, Tokens c_chunk);
  void record_kv(TimeNs time, std::span<const Tokens> kv_loads);
  void record_control(TimeNs time, const SchedulerState& sched);
  void record_step(TimeNs time, Tokens generated);
  void record_dispatch(TimeNs time, int instance_id) {
    dispatches_.emplace_back(time, instance_id);
  }
  void count_deferrals(std::uint64_t n) { deferrals_ += n; }
  void count_flow_control() { flow_control_events_ += 1; }
  void count_watchdog_fire() { watchdog_fires_ += 1; }
  void count_dropped_end_forward() { dropped_end_forwards_ += 1; }
  void count_mask_event() { mask_events_ += 1; }
  void count_fallback_event() { fallback_events_ += 1; }

  Aggregates finalize(const RequestTable& requests, TimeNs warmup,
                      TimeNs duration, std::uint64_t rejected_samples) const;

  // Report files; every field is fixed-format so identical runs produce
  // byte-identical text.
  static std::string requests_csv(const RequestTable& requests);
  std::string passes_csv() const;
  std::string kvband_csv() const;
  std::string control_csv() const;

  const std::vector<PassSample>& pass_samples() const { return passes_; }
  const std::vector<KvSample>& kv_samples() const { return kv_; }
  // (time, instance) of every scheduler dispatch, for liveness checks.
  const std::vector<std::pair<TimeNs, int>>& dispatch_log() const {
    return dispatches_;
  }

 private:
  std::vector<PassSample> passes_;
  std::vector<KvSample> kv_;
  std::vector<std::pair<TimeNs, int>> dispatches_;
  std::vector<ControlSample> control_;
  std::vector<StepSample> steps_;
  std::uint64_t deferrals_ = 0;
  std::uint64_t flow_control_events_ = 0;
  std::uint64_t watchdog_fires_ = 0;
  std::uint64_t dropped_end_forwards_ = 0;
  std::uint64_t mask_events_ = 0;
  std::uint64_t fallback_events_ = 0;
};

}  // namespace sbsim
