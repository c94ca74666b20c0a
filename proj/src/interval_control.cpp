/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/interval_control.h"

#include <algorithm>

namespace sbsim {

TimeNs window_mean(const SchedulerState& state) {
  if (state.exec_window.empty()) return state.t_default;
  TimeNs sum = 0;
  for (TimeNs t : state.exec_window) sum += t;
  return sum / static_cast<TimeNs>(state.exec_window.size());
}

TimeNs recompute_interval(SchedulerState& state) {
  state.t_fwd_bar = window_mean(state);
  if (state.n_active <= 0) return state.i_opt;  // dispatch suspended
  state.i_opt = std::max<TimeNs>(
      1, (state.t_fwd_bar + state.l_net) / state.n_active);
  return state.i_opt;
}

bool on_end_forward_sample(SchedulerState& state, TimeNs measured) {
  if (measured <= 0) {
    state.rejected_samples += 1;
    return false;
  }
  state.exec_window.push_back(measured);
  while (state.exec_window.size() > state.w_size)
    state.exec_window.pop_front();
  recompute_interval(state);
  return true;
}

void on_topology_change(SchedulerState& state, int n_active) {
  state.n_active = n_active;
  recompute_interval(state);
}

bool instance_ready(const InstanceState& inst, TimeNs now) {
  if (inst.quiescent()) return true;
  if (inst.end_forward_seen) return true;
  if (inst.watchdog_fired) return true;
  return inst.watchdog_deadline && now >= *inst.watchdog_deadline;
}

std::optional<int> select_ready_instance(
    const std::vector<InstanceState*>& pool, int last_dispatched,
    TimeNs now) {
  // Dual-trigger rotation: the tick names a single rotation target (the
  // first healthy instance after last_dispatched in id order, wrapping),
  // and dispatch happens only once that target is ready. A busy target
  // defers the dispatch to its own EndForward rather than yielding its
  // turn, which keeps consecutive batches addressed to distinct instances
  // and preserves the stagger. Pool is expected in ascending id order.
  const InstanceState* target = nullptr;
  for (const auto* inst : pool)
    if (inst->healthy && inst->instance_id > last_dispatched) {
      target = inst;
      break;
    }
  if (target == nullptr)
    for (const auto* inst : pool)
      if (inst->healthy) {
        target = inst;
        break;
      }
  if (target == nullptr) return std::nullopt;  // no healthy instance
  if (!instance_ready(*target, now)) return std::nullopt;
  return target->instance_id;
}

TimeNs arm_watchdog(InstanceState& inst, TimeNs now, TimeNs t_fwd_bar,
                    double multiplier, SimClock& clock) {
  TimeNs deadline =
      now + static_cast<TimeNs>(std::llround(
                multiplier * static_cast<double>(t_fwd_bar)));
  inst.watchdog_generation += 1;
  inst.watchdog_deadline = deadline;
  clock.schedule(deadline, EventKind::kWatchdogExpiry,
                 WatchdogPayload{inst.instance_id, inst.watchdog_generation});
  return deadline;
}

void disarm_watchdog(InstanceState& inst) {
  inst.watchdog_generation += 1;
  inst.watchdog_deadline.reset();
}

bool watchdog_expired(InstanceState& inst, std::uint64_t generation) {
  if (generation != inst.watchdog_generation) return false;
  inst.watchdog_fired = true;
  inst.task_depth = 0;
  inst.watchdog_deadline.reset();
  return true;
}

}  // namespace sbsim
