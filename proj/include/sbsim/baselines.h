/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sbsim/core.h"

namespace sbsim {

// Rotation cursor for the immediate-dispatch baseline: instances rotate per
// request and each instance rotates its own DP units.
struct RotationCursor {
  int next_instance = 0;                // position in the pool
  std::vector<int> next_dp;             // per pool position
};

// Immediate dispatch: the arriving request goes to the rotation-next healthy
// instance's rotation-next DP right away, whether or not the engine is busy.
// Returns (pool position, dp index) and advances the cursor; nullopt when no
// healthy instance exists.
std::optional<std::pair<int, int>> immediate_dispatch(
    RotationCursor& cursor, const std::vector<InstanceState*>& pool);

// Least-outstanding dispatch: the DP unit with the fewest outstanding
// prefill tokens (u_flight + r_queued) across all healthy instances, ties to
// the lowest (instance, dp) pair.
std::optional<std::pair<int, int>> least_outstanding(
    const std::vector<InstanceState*>& pool);

}  // namespace sbsim
