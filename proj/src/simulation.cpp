/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/simulation.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "sbsim/baselines.h"
#include "sbsim/decode_alloc.h"
#include "sbsim/interval_control.h"
#include "sbsim/prefill_alloc.h"
#include "sbsim/simclock.h"
#include "sbsim/workload.h"

namespace sbsim {
namespace {

constexpr TimeNs kNever = std::numeric_limits<TimeNs>::max();

struct DropWindow {
  int instance = -1;  // -1 matches every instance
  TimeNs from = 0;
  TimeNs until = kNever;
};

// One experiment run: owns the cluster, the request table, and the event
// handlers. Single-threaded by construction; the event loop is the only
// mutator.
class Runner {
 public:
  explicit Runner(const ExperimentConfig& config)
      : config_(config),
        cluster_(new_cluster(config.cluster)),
        decode_rng_(config.sim.seed ^ 0x9E3779B97F4A7C15ULL) {}

  SimulationResult run();

 private:
  bool sbs() const { return config_.policy == SchedulerPolicy::kSbs; }
  SchedulerState& sched() { return cluster_.scheduler; }

  void setup_faults();
  void maybe_die(InstanceState& inst, TimeNs now);
  bool drop_matches(int instance_id, TimeNs now) const;

  void handle(const Event& ev);
  void on_arrival(std::uint64_t request_id, TimeNs now);
  void on_tick(std::uint64_t generation, TimeNs now);
  void on_end_forward(const EndForwardPayload& p, TimeNs now);
  void on_watchdog(const WatchdogPayload& p, TimeNs now);
  void on_topology(const TopologyPayload& p, TimeNs now);
  void on_decode_step(const DecodeStepPayload& p, TimeNs now);

  void arm_tick(TimeNs at);
  void try_dispatch(TimeNs now);
  void perform_dispatch(InstanceState& inst, TimeNs now);
  void baseline_dispatch(Request& req, TimeNs now);
  void try_start_pass(InstanceState& inst, TimeNs now);

  void hand_off_finished(const std::vector<std::uint64_t>& ids, TimeNs now);
  void drain_decode_admissions(TimeNs now);
  void record_kv_snapshot(TimeNs now);

  void check_request_invariants() const;

  const ExperimentConfig& config_;
  Cluster cluster_;
  std::vector<InstanceState*> prefill_pool_;
  std::vector<InstanceState*> decode_pool_;
  RequestTable requests_;
  SimClock clock_;
  MetricsCollector metrics_;

  RotationCursor baseline_cursor_;
  std::deque<std::uint64_t> decode_wait_;  // finished prefill, not yet resident
  std::mt19937_64 decode_rng_;
  std::uint64_t decode_rr_counter_ = 0;

  std::vector<TimeNs> death_time_;
  std::vector<DropWindow> drop_windows_;

  TimeNs horizon_ = 0;
};

void Runner::setup_faults() {
  const auto bad_instance = [&](int id) {
    return id < 0 || id >= static_cast<int>(cluster_.instances.size());
  };
  death_time_.assign(cluster_.instances.size(), kNever);
  for (const DeadFault& f : config_.faults.dead) {
    if (bad_instance(f.instance))
      throw ConfigError("faults.dead: instance out of range");
    TimeNs t = seconds_to_ns(f.time_s);
    death_time_[static_cast<std::size_t>(f.instance)] =
        std::min(death_time_[static_cast<std::size_t>(f.instance)], t);
  }
  for (const TopologyFault& f : config_.faults.topology) {
    if (bad_instance(f.instance))
      throw ConfigError("faults.topology: instance out of range");
    clock_.schedule(seconds_to_ns(f.time_s), EventKind::kTopologyChange,
                    TopologyPayload{f.instance, f.healthy});
  }
  for (const DropEndForwardFault& f : config_.faults.drop_end_forward) {
    if (f.instance != -1 && bad_instance(f.instance))
      throw ConfigError("faults.drop_end_forward: instance out of range");
    DropWindow w;
    w.instance = f.instance;
    w.from = seconds_to_ns(f.from_s);
    w.until = std::isfinite(f.until_s) ? seconds_to_ns(f.until_s) : kNever;
    drop_windows_.push_back(w);
  }
}

void Runner::maybe_die(InstanceState& inst, TimeNs now) {
  if (!inst.dead &&
      now >= death_time_[static_cast<std::size_t>(inst.instance_id)])
    inst.dead = true;
}

bool Runner::drop_matches(int instance_id, TimeNs now) const {
  for (const DropWindow& w : drop_windows_)
    if ((w.instance == -1 || w.instance == instance_id) && now >= w.from &&
        now < w.until)
      return true;
  return false;
}

SimulationResult Runner::run() {
  prefill_pool_ = cluster_.prefill_pool();
  decode_pool_ = cluster_.decode_pool();
  setup_faults();

  requests_ = generate_workload(config_.workload, config_.sim.seed);
  std::uint64_t digest = workload_digest(requests_);
  horizon_ = seconds_to_ns(config_.workload.duration_s);

  std::ostringstream trace_stream;
  if (config_.sim.trace) clock_.set_trace(&trace_stream);

  for (const Request& req : requests_)
    clock_.schedule(req.arrival_time, EventKind::kRequestArrival,
                    ArrivalPayload{req.id});

  if (sbs()) metrics_.record_control(0, sched());

  clock_.run_until(horizon_, [this](const Event& ev) { handle(ev); });

  check_request_invariants();

  SimulationResult result;
  TimeNs warmup =
      seconds_to_ns(config_.workload.duration_s * config_.sim.warmup_fraction);
  result.aggregates = metrics_.finalize(requests_, warmup, horizon_,
                                        sched().rejected_samples);
  result.workload_digest = digest;
  result.horizon = horizon_;
  result.trace = trace_stream.str();
  result.requests = std::move(requests_);
  result.metrics = std::move(metrics_);
  return result;
}

void Runner::handle(const Event& ev) {
  switch (ev.kind) {
    case EventKind::kRequestArrival:
      on_arrival(std::get<ArrivalPayload>(ev.payload).request_id, ev.time);
      break;
    case EventKind::kScheduleTick:
      on_tick(std::get<TickPayload>(ev.payload).generation, ev.time);
      break;
    case EventKind::kEndForward:
      on_end_forward(std::get<EndForwardPayload>(ev.payload), ev.time);
      break;
    case EventKind::kWatchdogExpiry:
      on_watchdog(std::get<WatchdogPayload>(ev.payload), ev.time);
      break;
    case EventKind::kTopologyChange:
      on_topology(std::get<TopologyPayload>(ev.payload), ev.time);
      break;
    case EventKind::kDecodeStep:
      on_decode_step(std::get<DecodeStepPayload>(ev.payload), ev.time);
      break;
  }
}

/* ============================ arrivals ============================ */

void Runner::on_arrival(std::uint64_t request_id, TimeNs now) {
  Request& req = requests_.at(request_id);
  if (sbs()) {
    sched().q_new.push_back(request_id);
    try_dispatch(now);
    return;
  }
  baseline_dispatch(req, now);
}

void Runner::baseline_dispatch(Request& req, TimeNs now) {
  std::optional<std::pair<int, int>> target;
  if (config_.policy == SchedulerPolicy::kLeastOutstanding)
    target = least_outstanding(prefill_pool_);
  else
    target = immediate_dispatch(baseline_cursor_, prefill_pool_);
  if (!target) return;  // no healthy instance; the request stays pending

  InstanceState& inst = *prefill_pool_[static_cast<std::size_t>(target->first)];
  req.status = RequestStatus::kDispatched;
  req.dispatch_time = now;
  req.compute_total = req.prompt_len;
  dispatch_prefill(inst, target->second, req, req.prompt_len);
  metrics_.record_dispatch(now, inst.instance_id);

  maybe_die(inst, now);
  try_start_pass(inst, now);
}

void Runner::try_start_pass(InstanceState& inst, TimeNs now) {
  (void)now;
  auto begin =
      try_begin_prefill_pass(inst, requests_, config_.cluster.engine, clock_);
  if (begin) metrics_.record_pass(*begin, config_.cluster.c_chunk);
}

/* ============================ staggered loop ========================== */

void Runner::arm_tick(TimeNs at) {
  sched().tick_generation += 1;
  clock_.schedule(std::max(at, clock_.now()), EventKind::kScheduleTick,
                  TickPayload{sched().tick_generation});
}

void Runner::on_tick(std::uint64_t generation, TimeNs now) {
  if (generation != sched().tick_generation) return;  // superseded
  try_dispatch(now);
}

void Runner::try_dispatch(TimeNs now) {
  SchedulerState& s = sched();
  if (s.queued_total() == 0) return;
  if (s.n_active <= 0) return;  // suspended until a topology recovery
  if (s.last_dispatch && now < *s.last_dispatch + s.i_opt) {
    arm_tick(*s.last_dispatch + s.i_opt);
    return;
  }
  auto target = select_ready_instance(prefill_pool_, s.last_dispatched_instance,
                                      now);
  if (!target) {
    // Rotation target is silent; retry at interval cadence while waiting for
    // its EndForward or watchdog.
    arm_tick(now + s.i_opt);
    return;
  }
  perform_dispatch(cluster_.instances.at(static_cast<std::size_t>(*target)),
                   now);
}

void Runner::perform_dispatch(InstanceState& inst, TimeNs now) {
  SchedulerState& s = sched();
  const bool cache_aware = config_.prefill_mode == AllocMode::kCacheAware &&
                           config_.cluster.cache.enabled;

  std::vector<Request*> pending_view;
  pending_view.reserve(s.q_pending.size());
  for (std::uint64_t id : s.q_pending) pending_view.push_back(&requests_.at(id));
  std::vector<Request*> new_view;
  new_view.reserve(s.q_new.size());
  for (std::uint64_t id : s.q_new) new_view.push_back(&requests_.at(id));

  std::vector<DpPlan> dps;
  dps.reserve(inst.dp_units.size());
  for (std::size_t d = 0; d < inst.dp_units.size(); ++d) {
    DpPlan plan;
    plan.dp_index = static_cast<int>(d);
    plan.c_avail = inst.dp_units[d].c_avail();
    plan.cache = cache_aware ? &inst.dp_units[d].cache : nullptr;
    dps.push_back(plan);
  }

  AllocationResult alloc = allocate_batch(pending_view, new_view, dps,
                                          config_.cluster.n_limit,
                                          config_.prefill_mode);

  metrics_.count_deferrals(alloc.deferred.size());
  if (alloc.flow_control) metrics_.count_flow_control();
  for (Request* req : alloc.throttled) req->status = RequestStatus::kThrottled;

  s.q_pending.clear();
  for (Request* req : alloc.deferred) s.q_pending.push_back(req->id);
  s.q_new.clear();

  if (alloc.mapping.empty()) {
    // Headroom exhausted: nothing reached the instance, so no dispatch
    // bookkeeping; retry at interval cadence.
    if (s.queued_total() > 0) arm_tick(now + s.i_opt);
    return;
  }

  // Hits are resolved against the pre-dispatch cache state for the whole
  // batch, then the new prefixes are registered.
  std::vector<Tokens> effective(alloc.mapping.size(), 0);
  for (std::size_t i = 0; i < alloc.mapping.size(); ++i) {
    auto [req, dp_index] = alloc.mapping[i];
    Tokens hit = 0;
    if (cache_aware)
      hit = inst.dp_units[static_cast<std::size_t>(dp_index)]
                .cache.longest_hit(req->prefix_tokens, req->prompt_len);
    effective[i] = std::max<Tokens>(1, req->prompt_len - hit);
  }
  for (std::size_t i = 0; i < alloc.mapping.size(); ++i) {
    auto [req, dp_index] = alloc.mapping[i];
    req->status = RequestStatus::kDispatched;
    req->dispatch_time = now;
    req->compute_total = effective[i];
    dispatch_prefill(inst, dp_index, *req, effective[i]);
    if (cache_aware)
      inst.dp_units[static_cast<std::size_t>(dp_index)].cache.insert(
          req->prefix_tokens, req->prompt_len);
  }

  s.last_dispatch = now;
  s.last_dispatched_instance = inst.instance_id;
  inst.task_depth += 1;
  inst.end_forward_seen = false;
  inst.watchdog_fired = false;
  arm_watchdog(inst, now, s.t_fwd_bar, config_.cluster.watchdog_multiplier,
               clock_);
  metrics_.record_dispatch(now, inst.instance_id);
  metrics_.record_control(now, s);

  maybe_die(inst, now);
  try_start_pass(inst, now);

  if (s.queued_total() > 0) arm_tick(now + s.i_opt);
}

/* ============================ signals ============================ */

void Runner::on_end_forward(const EndForwardPayload& p, TimeNs now) {
  InstanceState& inst =
      cluster_.instances.at(static_cast<std::size_t>(p.instance_id));
  maybe_die(inst, now);
  if (inst.dead) return;                   // engine is gone
  if (!inst.busy || p.pass_seq != inst.pass_seq) return;  // stale

  PassResult pass = finish_prefill_pass(inst, requests_, now);
  hand_off_finished(pass.finished, now);
  try_start_pass(inst, now);  // gated restart on remaining backlog

  if (!sbs()) return;

  if (drop_matches(p.instance_id, now)) {
    metrics_.count_dropped_end_forward();
    return;  // scheduler view stays stale; watchdog path recovers
  }
  on_end_forward_sample(sched(), pass.measured);
  inst.task_depth = std::max(0, inst.task_depth - 1);
  // A drained backlog makes the instance quiescent anyway; keeping the
  // message flag set while leftover chunks drain lets the next dispatch
  // pipeline behind at most one residual pass instead of stalling rotation.
  inst.end_forward_seen = true;
  disarm_watchdog(inst);
  metrics_.record_control(now, sched());
  try_dispatch(now);
}

void Runner::on_watchdog(const WatchdogPayload& p, TimeNs now) {
  InstanceState& inst =
      cluster_.instances.at(static_cast<std::size_t>(p.instance_id));
  if (!watchdog_expired(inst, p.generation)) return;  // superseded
  metrics_.count_watchdog_fire();
  if (sbs()) try_dispatch(now);
}

void Runner::on_topology(const TopologyPayload& p, TimeNs now) {
  InstanceState& inst =
      cluster_.instances.at(static_cast<std::size_t>(p.instance_id));
  inst.healthy = p.healthy;
  int n_active = 0;
  for (const InstanceState* i : prefill_pool_)
    if (i->healthy) n_active += 1;
  if (!sbs()) return;
  on_topology_change(sched(), n_active);
  metrics_.record_control(now, sched());
  try_dispatch(now);
}

/* ============================ decode side ============================ */

void Runner::hand_off_finished(const std::vector<std::uint64_t>& ids,
                               TimeNs now) {
  for (std::uint64_t id : ids) {
    Request& req = requests_.at(id);
    // The final prefill pass produces the first output token.
    req.first_token_time = now;
    if (req.decode_target() == 0) {
      req.status = RequestStatus::kCompleted;
      req.completion_time = now;
      continue;
    }
    decode_wait_.push_back(id);
  }
  drain_decode_admissions(now);
}

void Runner::drain_decode_admissions(TimeNs now) {
  if (decode_wait_.empty()) return;
  const int cap = config_.cluster.decode_max_batch_per_dp;
  std::vector<InstanceState*> touched;

  auto observer = [this](const DecodePlacementInfo& info) {
    if (info.fallback)
      metrics_.count_fallback_event();
    else if (info.safe.size() < info.kv_snapshot.size())
      metrics_.count_mask_event();
  };

  while (!decode_wait_.empty()) {
    struct Slot {
      InstanceState* inst;
      int dp;
    };
    std::vector<Slot> slots;
    std::vector<DecodeUnitPlan> units;
    for (InstanceState* inst : decode_pool_) {
      maybe_die(*inst, now);
      if (!inst->healthy || inst->dead) continue;
      for (std::size_t d = 0; d < inst->dp_units.size(); ++d) {
        DpUnitState& dp = inst->dp_units[d];
        if (cap > 0 && dp.batch_size >= cap) continue;
        units.push_back(DecodeUnitPlan{static_cast<int>(slots.size()),
                                       dp.batch_size, dp.kv_load});
        slots.push_back(Slot{inst, static_cast<int>(d)});
      }
    }
    if (slots.empty()) break;  // all units saturated; retry on step completion

    // Longest total sequence first, matching the batch-order rule.
    std::size_t best = 0;
    for (std::size_t i = 1; i < decode_wait_.size(); ++i) {
      const Request& a = requests_.at(decode_wait_[i]);
      const Request& b = requests_.at(decode_wait_[best]);
      Tokens la = a.prompt_len + a.output_len;
      Tokens lb = b.prompt_len + b.output_len;
      if (la > lb || (la == lb && a.id < b.id)) best = i;
    }
    Request& req = requests_.at(decode_wait_[best]);

    std::size_t pos = 0;
    switch (config_.decode_policy) {
      case DecodePolicy::kIqr:
        pos = static_cast<std::size_t>(select_decode_unit(
            units, config_.cluster.iqr_k, req.id, observer));
        break;
      case DecodePolicy::kRandom:
        pos = std::min(slots.size() - 1,
                       static_cast<std::size_t>(u01(decode_rng_) *
                                                static_cast<double>(
                                                    slots.size())));
        break;
      case DecodePolicy::kRoundRobin:
        pos = static_cast<std::size_t>(decode_rr_counter_ % slots.size());
        decode_rr_counter_ += 1;
        break;
    }

    InstanceState* inst = slots[pos].inst;
    admit_decode(*inst, slots[pos].dp, req);
    decode_wait_.erase(decode_wait_.begin() +
                       static_cast<std::ptrdiff_t>(best));
    if (std::find(touched.begin(), touched.end(), inst) == touched.end())
      touched.push_back(inst);
  }

  for (InstanceState* inst : touched)
    try_begin_decode_step(*inst, requests_, config_.cluster.engine, clock_);
}

void Runner::record_kv_snapshot(TimeNs now) {
  std::vector<Tokens> loads;
  for (const InstanceState* inst : decode_pool_) {
    if (!inst->healthy || inst->dead) continue;
    for (const DpUnitState& dp : inst->dp_units) loads.push_back(dp.kv_load);
  }
  if (!loads.empty())
    metrics_.record_kv(now,
                       std::span<const Tokens>(loads.data(), loads.size()));
}

void Runner::on_decode_step(const DecodeStepPayload& p, TimeNs now) {
  InstanceState& inst =
      cluster_.instances.at(static_cast<std::size_t>(p.instance_id));
  maybe_die(inst, now);
  if (inst.dead) return;
  if (!inst.stepping || p.step_seq != inst.step_seq) return;  // stale

  StepResult step = finish_decode_step(inst, requests_,
                                       config_.cluster.decode_tokens_per_step,
                                       now);
  metrics_.record_step(now, step.generated);
  record_kv_snapshot(now);

  drain_decode_admissions(now);  // released capacity may admit waiters
  try_begin_decode_step(inst, requests_, config_.cluster.engine, clock_);
}

/* ============================ invariants ============================ */

void Runner::check_request_invariants() const {
  for (const Request& req : requests_) {
    if (req.status != RequestStatus::kCompleted) continue;
    if (!req.dispatch_time || !req.prefill_start || !req.first_token_time ||
        !req.completion_time)
      throw std::logic_error("completed request missing timestamps");
    bool monotone = req.arrival_time <= *req.dispatch_time &&
                    *req.dispatch_time <= *req.prefill_start &&
                    *req.prefill_start <= *req.first_token_time &&
                    *req.first_token_time <= *req.completion_time;
    if (!monotone)
      throw std::logic_error("request timestamps are not monotone");
    if (req.compute_done != req.compute_total)
      throw std::logic_error("completed request with unfinished prefill");
    if (req.decode_done != req.decode_target())
      throw std::logic_error("completed request with unfinished decode");
  }
}

}  // namespace

SimulationResult run_experiment(const ExperimentConfig& config) {
  validate(config.cluster);
  Runner runner(config);
  return runner.run();
}

/* ============================ reports ============================ */

nlohmann::ordered_json aggregates_json(const Aggregates& agg) {
  nlohmann::ordered_json out;
  out["generated"] = agg.generated;
  out["completed"] = agg.completed;
  out["throttled"] = agg.throttled;
  out["in_flight"] = agg.in_flight;
  out["window_requests"] = agg.window_requests;
  out["ttft_mean_s"] = agg.ttft_mean_s;
  out["ttft_p50_s"] = agg.ttft_p50_s;
  out["ttft_p95_s"] = agg.ttft_p95_s;
  out["scheduler_wait_mean_s"] = agg.scheduler_wait_mean_s;
  out["device_wait_mean_s"] = agg.device_wait_mean_s;
  out["total_wait_mean_s"] = agg.total_wait_mean_s;
  out["passes"] = agg.passes;
  out["chunk_util_mean"] = agg.chunk_util_mean;
  out["decode_steps"] = agg.decode_steps;
  out["output_tokens"] = agg.output_tokens;
  out["output_tokens_per_s"] = agg.output_tokens_per_s;
  out["kv_mean_time_avg"] = agg.kv_mean_time_avg;
  out["kv_sigma_time_avg"] = agg.kv_sigma_time_avg;
  out["completed_per_s"] = agg.completed_per_s;
  out["watchdog_fires"] = agg.watchdog_fires;
  out["dropped_end_forwards"] = agg.dropped_end_forwards;
  out["rejected_samples"] = agg.rejected_samples;
  out["deferrals"] = agg.deferrals;
  out["flow_control_events"] = agg.flow_control_events;
  out["mask_events"] = agg.mask_events;
  out["fallback_events"] = agg.fallback_events;
  out["warmup_cutoff_s"] = agg.warmup_cutoff_s;
  out["duration_s"] = agg.duration_s;
  return out;
}

nlohmann::ordered_json summary_json(const ExperimentConfig& config,
                                    const SimulationResult& result) {
  nlohmann::ordered_json out;
  out["config"] = resolved_json(config);
  out["workload_digest"] = digest_hex(result.workload_digest);
  out["aggregates"] = aggregates_json(result.aggregates);
  return out;
}

void write_outputs(const ExperimentConfig& config,
                   const SimulationResult& result,
                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto write_file = [&](const char* name, const std::string& content) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out)
      throw std::runtime_error(std::string("cannot write ") + name);
    out << content;
  };
  write_file("requests.csv", MetricsCollector::requests_csv(result.requests));
  write_file("passes.csv", result.metrics.passes_csv());
  write_file("kvband.csv", result.metrics.kvband_csv());
  write_file("control.csv", result.metrics.control_csv());
  write_file("summary.json", summary_json(config, result).dump(2) + "\n");
  if (!result.trace.empty()) write_file("trace.tsv", result.trace);
}

/* ============================ peak search ============================ */

PeakResult find_peak_qps(const ExperimentConfig& base, double slo_ttft_s,
                         double rate_min, double rate_max, double resolution) {
  if (slo_ttft_s <= 0) throw ConfigError("peak: slo_ttft must be > 0");
  if (rate_min <= 0 || rate_max < rate_min || resolution <= 0)
    throw ConfigError("peak: invalid rate search bounds");

  PeakResult result;
  auto probe = [&](double rate) {
    ExperimentConfig cfg = base;
    cfg.workload.rate_qps = rate;
    SimulationResult run = run_experiment(cfg);
    PeakProbe p;
    p.rate_qps = rate;
    p.ttft_mean_s = run.aggregates.ttft_mean_s;
    p.window_requests = run.aggregates.window_requests;
    p.feasible = p.window_requests >= 10 && p.ttft_mean_s <= slo_ttft_s;
    result.probes.push_back(p);
    return p.feasible;
  };

  if (!probe(rate_min)) return result;  // SLO unattainable at the floor
  result.attainable = true;
  if (probe(rate_max)) {
    result.peak_qps = rate_max;  // saturated at the search ceiling
    return result;
  }
  double lo = rate_min, hi = rate_max;
  while (hi - lo > resolution) {
    double mid = 0.5 * (lo + hi);
    if (probe(mid))
      lo = mid;
    else
      hi = mid;
  }
  result.peak_qps = lo;
  return result;
}

}  // namespace sbsim
