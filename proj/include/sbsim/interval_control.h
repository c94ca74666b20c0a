/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <optional>
#include <vector>

#include "sbsim/core.h"
#include "sbsim/simclock.h"

namespace sbsim {

// Mean of the execution window in integer nanoseconds; t_default when the
// window is empty.
TimeNs window_mean(const SchedulerState& state);

// Recomputes i_opt = (t_fwd_bar + l_net) / n_active with integer division,
// clamped to at least 1 ns. When n_active <= 0 the interval is left as-is
// and dispatching stays suspended. Returns the current i_opt.
TimeNs recompute_interval(SchedulerState& state);

// Feeds one measured forward time into the sliding window (evicting the
// oldest entry beyond w_size) and recomputes the interval. Non-positive
// measurements are rejected and counted; the window stays unchanged.
// Returns whether the sample was accepted.
bool on_end_forward_sample(SchedulerState& state, TimeNs measured);

// Applies a topology change: new active instance count takes effect
// immediately and the interval is recomputed without waiting for a tick.
void on_topology_change(SchedulerState& state, int n_active);

// An instance may receive a dispatch when it is quiescent (nothing
// outstanding and not executing), when it acknowledged its last dispatch, or
// when the liveness watchdog reset it.
bool instance_ready(const InstanceState& inst, TimeNs now);

// Strict rotation: the candidate is the next healthy instance after
// last_dispatched (wrapping); it is returned only if ready. Dispatching
// never skips ahead of the rotation target, so a silent instance defers the
// batch to its EndForward or watchdog expiry.
std::optional<int> select_ready_instance(
    const std::vector<InstanceState*>& pool, int last_dispatched, TimeNs now);

// Arms the liveness watchdog at now + multiplier * t_fwd_bar, bumping the
// generation so stale expiry events are ignored. Returns the deadline.
TimeNs arm_watchdog(InstanceState& inst, TimeNs now, TimeNs t_fwd_bar,
                    double multiplier, SimClock& clock);

// Cancels an armed watchdog (the pending expiry event goes stale).
void disarm_watchdog(InstanceState& inst);

// Handles an expiry event; returns true if it was current (the instance is
// force-reset to ready), false if stale.
bool watchdog_expired(InstanceState& inst, std::uint64_t generation);

}  // namespace sbsim
