/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "sbsim/decode_alloc.h"

namespace sbsim {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

double expected_wait(DispatchPolicyKind policy, double t_fwd_s,
                     int n_instances) {
  if (t_fwd_s < 0) throw std::logic_error("expected_wait: negative t_fwd");
  if (n_instances < 1) throw std::logic_error("expected_wait: n < 1");
  switch (policy) {
    case DispatchPolicyKind::kImmediate:
      return t_fwd_s / 2.0;
    case DispatchPolicyKind::kStaggered:
      return t_fwd_s / (2.0 * static_cast<double>(n_instances));
  }
  throw std::logic_error("expected_wait: unknown policy");
}

double chunk_utilization(std::span<const Tokens> dp_assigned, Tokens c_chunk) {
  if (dp_assigned.empty())
    throw std::logic_error("chunk_utilization: no DP units");
  if (c_chunk <= 0) throw std::logic_error("chunk_utilization: c_chunk <= 0");
  double sum = 0.0;
  for (Tokens a : dp_assigned)
    sum += static_cast<double>(std::min(a, c_chunk)) /
           static_cast<double>(c_chunk);
  return sum / static_cast<double>(dp_assigned.size());
}

KvBand kv_band(std::span<const Tokens> kv_loads) {
  if (kv_loads.empty()) throw std::logic_error("kv_band: no loads");
  KvBand band;
  double n = static_cast<double>(kv_loads.size());
  double sum = 0.0;
  band.min = kv_loads[0];
  band.max = kv_loads[0];
  for (Tokens v : kv_loads) {
    sum += static_cast<double>(v);
    band.min = std::min(band.min, v);
    band.max = std::max(band.max, v);
  }
  band.mean = sum / n;
  double var = 0.0;
  for (Tokens v : kv_loads) {
    double d = static_cast<double>(v) - band.mean;
    var += d * d;
  }
  band.sigma = std::sqrt(var / n);
  band.lo = band.mean - band.sigma;
  band.hi = band.mean + band.sigma;
  return band;
}

/* ============================ collector ============================ */

void MetricsCollector::record_pass(const PassBegin& begin, Tokens c_chunk) {
  PassSample sample;
  sample.time = begin.time;
  sample.instance_id = begin.instance_id;
  sample.dp_assigned = begin.dp_assigned;
  sample.utilization = chunk_utilization(
      std::span<const Tokens>(begin.dp_assigned.data(),
                              begin.dp_assigned.size()),
      c_chunk);
  passes_.push_back(std::move(sample));
}

void MetricsCollector::record_kv(TimeNs time,
                                 std::span<const Tokens> kv_loads) {
  kv_.push_back(KvSample{time, kv_band(kv_loads)});
}

void MetricsCollector::record_control(TimeNs time,
                                      const SchedulerState& sched) {
  control_.push_back(
      ControlSample{time, sched.i_opt, sched.t_fwd_bar, sched.n_active});
}

void MetricsCollector::record_step(TimeNs time, Tokens generated) {
  steps_.push_back(StepSample{time, generated});
}

Aggregates MetricsCollector::finalize(const RequestTable& requests,
                                      TimeNs warmup, TimeNs duration,
                                      std::uint64_t rejected_samples) const {
  Aggregates agg;
  agg.warmup_cutoff_s = ns_to_seconds(warmup);
  agg.duration_s = ns_to_seconds(duration);
  agg.watchdog_fires = watchdog_fires_;
  agg.dropped_end_forwards = dropped_end_forwards_;
  agg.rejected_samples = rejected_samples;
  agg.deferrals = deferrals_;
  agg.flow_control_events = flow_control_events_;
  agg.mask_events = mask_events_;
  agg.fallback_events = fallback_events_;

  std::vector<double> ttft;
  double sched_sum = 0.0, device_sum = 0.0, ttft_sum = 0.0;
  std::size_t completions_in_window = 0;
  for (const auto& req : requests) {
    agg.generated += 1;
    switch (req.status) {
      case RequestStatus::kThrottled:
        agg.throttled += 1;
        continue;
      case RequestStatus::kCompleted:
        agg.completed += 1;
        break;
      default:
        agg.in_flight += 1;
        continue;
    }
    if (req.completion_time && *req.completion_time >= warmup)
      completions_in_window += 1;
    if (req.arrival_time < warmup) continue;
    agg.window_requests += 1;
    double t = ns_to_seconds(*req.first_token_time - req.arrival_time);
    double s = ns_to_seconds(*req.dispatch_time - req.arrival_time);
    double d = ns_to_seconds(*req.prefill_start - *req.dispatch_time);
    ttft.push_back(t);
    ttft_sum += t;
    sched_sum += s;
    device_sum += d;
  }
  if (!ttft.empty()) {
    auto n = static_cast<double>(ttft.size());
    agg.ttft_mean_s = ttft_sum / n;
    agg.scheduler_wait_mean_s = sched_sum / n;
    agg.device_wait_mean_s = device_sum / n;
    agg.total_wait_mean_s = (sched_sum + device_sum) / n;
    agg.ttft_p50_s = percentile(ttft, 50.0);
    agg.ttft_p95_s = percentile(ttft, 95.0);
  }

  double util_sum = 0.0;
  for (const auto& p : passes_) {
    if (p.time < warmup) continue;
    agg.passes += 1;
    util_sum += p.utilization;
  }
  if (agg.passes > 0)
    agg.chunk_util_mean = util_sum / static_cast<double>(agg.passes);

  double window_s = ns_to_seconds(duration - warmup);
  for (const auto& s : steps_) {
    if (s.time < warmup) continue;
    agg.decode_steps += 1;
    agg.output_tokens += static_cast<std::uint64_t>(s.generated);
  }
  if (window_s > 0) {
    agg.output_tokens_per_s =
        static_cast<double>(agg.output_tokens) / window_s;
    agg.completed_per_s =
        static_cast<double>(completions_in_window) / window_s;
  }

  double kv_mean_sum = 0.0, kv_sigma_sum = 0.0;
  std::size_t kv_n = 0;
  for (const auto& s : kv_) {
    if (s.time < warmup) continue;
    kv_mean_sum += s.band.mean;
    kv_sigma_sum += s.band.sigma;
    kv_n += 1;
  }
  if (kv_n > 0) {
    agg.kv_mean_time_avg = kv_mean_sum / static_cast<double>(kv_n);
    agg.kv_sigma_time_avg = kv_sigma_sum / static_cast<double>(kv_n);
  }
  return agg;
}

/* ============================ report files ============================ */

std::string MetricsCollector::requests_csv(const RequestTable& requests) {
  std::string out =
      "id,arrival_ns,dispatch_ns,prefill_start_ns,first_token_ns,"
      "completion_ns,scheduler_wait_ns,device_wait_ns,ttft_ns\n";
  for (const auto& req : requests) {
    if (req.status != RequestStatus::kCompleted) continue;
    out += std::to_string(req.id);
    out += ',';
    out += std::to_string(req.arrival_time);
    out += ',';
    out += std::to_string(*req.dispatch_time);
    out += ',';
    out += std::to_string(*req.prefill_start);
    out += ',';
    out += std::to_string(*req.first_token_time);
    out += ',';
    out += std::to_string(*req.completion_time);
    out += ',';
    out += std::to_string(*req.dispatch_time - req.arrival_time);
    out += ',';
    out += std::to_string(*req.prefill_start - *req.dispatch_time);
    out += ',';
    out += std::to_string(*req.first_token_time - req.arrival_time);
    out += '\n';
  }
  return out;
}

std::string MetricsCollector::passes_csv() const {
  std::string out = "time_ns,instance,dp,assigned_tokens,utilization\n";
  for (const auto& p : passes_) {
    for (std::size_t d = 0; d < p.dp_assigned.size(); ++d) {
      out += std::to_string(p.time);
      out += ',';
      out += std::to_string(p.instance_id);
      out += ',';
      out += std::to_string(d);
      out += ',';
      out += std::to_string(p.dp_assigned[d]);
      out += ',';
      out += fixed(p.utilization, 6);
      out += '\n';
    }
  }
  return out;
}

std::string MetricsCollector::kvband_csv() const {
  std::string out = "time_ns,mean,lo,hi,min,max\n";
  for (const auto& s : kv_) {
    out += std::to_string(s.time);
    out += ',';
    out += fixed(s.band.mean, 3);
    out += ',';
    out += fixed(s.band.lo, 3);
    out += ',';
    out += fixed(s.band.hi, 3);
    out += ',';
    out += std::to_string(s.band.min);
    out += ',';
    out += std::to_string(s.band.max);
    out += '\n';
  }
  return out;
}

std::string MetricsCollector::control_csv() const {
  std::string out = "time_ns,i_opt_ns,t_fwd_bar_ns,n_active\n";
  for (const auto& s : control_) {
    out += std::to_string(s.time);
    out += ',';
    out += std::to_string(s.i_opt);
    out += ',';
    out += std::to_string(s.t_fwd_bar);
    out += ',';
    out += std::to_string(s.n_active);
    out += '\n';
  }
  return out;
}

}  // namespace sbsim
