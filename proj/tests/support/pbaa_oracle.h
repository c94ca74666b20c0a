/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

// Deliberately separate reimplementation of the batch allocator used as a
// reference in tests. Computes every step from first principles (full
// capacity scan per request, explicit phase loop) so that a shared bug with
// the production path is unlikely.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "sbsim/core.h"

namespace sbsim::testing {

struct OracleRequest {
  std::uint64_t id = 0;
  Tokens len = 0;
  std::vector<Tokens> hit;  // cached prefix per DP; empty means no cache
  int wait_cycles = 0;
};

struct OracleStep {
  std::uint64_t id = 0;
  bool assigned = false;
  int dp = -1;
  std::vector<Tokens> caps_after;
};

struct OracleOutcome {
  std::vector<std::pair<std::uint64_t, int>> mapping;  // placement order
  std::vector<std::uint64_t> deferred;                 // input order
  std::vector<std::uint64_t> throttled;
  std::vector<int> deferred_wait_cycles;  // after the increment
  std::vector<Tokens> caps;               // working capacities at the end
  std::vector<OracleStep> trace;
  bool flow_control = false;
};

inline Tokens oracle_charge(const OracleRequest& r, int dp, bool cache_aware) {
  if (!cache_aware || r.hit.empty()) return r.len;
  Tokens h = r.hit[static_cast<std::size_t>(dp)];
  return r.len - std::min(h, r.len);
}

// One greedy phase: longest first (ties by id), argmax of post-assignment
// capacity over all units, lowest index on ties, guarded by the chosen
// unit's positive pre-assignment headroom.
inline void oracle_phase(std::vector<OracleRequest>& queue,
                         std::vector<Tokens>& caps, bool cache_aware,
                         OracleOutcome& out,
                         std::vector<OracleRequest>& next_cycle) {
  std::vector<std::size_t> order(queue.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (queue[a].len != queue[b].len) return queue[a].len > queue[b].len;
    return queue[a].id < queue[b].id;
  });

  std::vector<bool> placed(queue.size(), false);
  for (std::size_t idx : order) {
    const OracleRequest& r = queue[idx];
    int best = 0;
    Tokens best_after = caps[0] - oracle_charge(r, 0, cache_aware);
    for (int d = 1; d < static_cast<int>(caps.size()); ++d) {
      Tokens after =
          caps[static_cast<std::size_t>(d)] - oracle_charge(r, d, cache_aware);
      if (after > best_after) {
        best = d;
        best_after = after;
      }
    }
    OracleStep step;
    step.id = r.id;
    if (caps[static_cast<std::size_t>(best)] > 0) {
      caps[static_cast<std::size_t>(best)] = best_after;
      out.mapping.emplace_back(r.id, best);
      placed[idx] = true;
      step.assigned = true;
      step.dp = best;
    }
    step.caps_after = caps;
    out.trace.push_back(std::move(step));
  }
  for (std::size_t i = 0; i < queue.size(); ++i)
    if (!placed[i]) next_cycle.push_back(queue[i]);
}

inline OracleOutcome oracle_allocate(std::vector<OracleRequest> pending,
                                     std::vector<OracleRequest> fresh,
                                     std::vector<Tokens> caps, int n_limit,
                                     bool cache_aware) {
  OracleOutcome out;
  std::vector<OracleRequest> next_cycle;
  oracle_phase(pending, caps, cache_aware, out, next_cycle);
  oracle_phase(fresh, caps, cache_aware, out, next_cycle);
  for (OracleRequest& r : next_cycle) {
    r.wait_cycles += 1;
    if (r.wait_cycles > n_limit) {
      out.throttled.push_back(r.id);
      out.flow_control = true;
    } else {
      out.deferred.push_back(r.id);
      out.deferred_wait_cycles.push_back(r.wait_cycles);
    }
  }
  out.caps = std::move(caps);
  return out;
}

}  // namespace sbsim::testing
