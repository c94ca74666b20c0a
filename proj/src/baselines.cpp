/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/baselines.h"

namespace sbsim {

std::optional<std::pair<int, int>> immediate_dispatch(
    RotationCursor& cursor, const std::vector<InstanceState*>& pool) {
  if (pool.empty()) return std::nullopt;
  if (cursor.next_dp.size() != pool.size())
    cursor.next_dp.assign(pool.size(), 0);

  for (std::size_t tries = 0; tries < pool.size(); ++tries) {
    int pos = cursor.next_instance % static_cast<int>(pool.size());
    cursor.next_instance = (pos + 1) % static_cast<int>(pool.size());
    const InstanceState* inst = pool[static_cast<std::size_t>(pos)];
    if (!inst->healthy || inst->dead) continue;
    int n_dp = static_cast<int>(inst->dp_units.size());
    int dp = cursor.next_dp[static_cast<std::size_t>(pos)] % n_dp;
    cursor.next_dp[static_cast<std::size_t>(pos)] = (dp + 1) % n_dp;
    return std::make_pair(pos, dp);
  }
  return std::nullopt;
}

std::optional<std::pair<int, int>> least_outstanding(
    const std::vector<InstanceState*>& pool) {
  std::optional<std::pair<int, int>> best;
  Tokens best_load = 0;
  for (std::size_t pos = 0; pos < pool.size(); ++pos) {
    const InstanceState* inst = pool[pos];
    if (!inst->healthy || inst->dead) continue;
    for (std::size_t d = 0; d < inst->dp_units.size(); ++d) {
      const auto& dp = inst->dp_units[d];
      Tokens load = dp.u_flight + dp.r_queued;
      if (!best || load < best_load) {
        best = std::make_pair(static_cast<int>(pos), static_cast<int>(d));
        best_load = load;
      }
    }
  }
  return best;
}

}  // namespace sbsim
