/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "sbsim/core.h"

namespace sbsim {

enum class AllocMode { kBasic, kCacheAware };

// Planning snapshot of one DP unit. c_avail is the working headroom and is
// updated as requests are placed; cache may be null (treated as no hits).
struct DpPlan {
  int dp_index = 0;
  Tokens c_avail = 0;
  const PrefixCache* cache = nullptr;
};

// Prefix-cache hit length for a request on a DP unit (0 without a cache).
Tokens cache_hit_len(const Request& req, const DpPlan& dp);

// Headroom left on the unit after placing the request there. Basic mode
// charges the full prompt; cache-aware mode discounts the cached prefix.
// May be negative: a single oversized request is absorbed as backlog.
Tokens capacity_after(const Request& req, const DpPlan& dp, AllocMode mode);

// One planned placement: request -> local DP index.
using Placement = std::pair<Request*, int>;

// Longest-first greedy placement of one queue onto the working DP snapshot.
// Each request goes to the unit maximizing capacity_after, ties to the
// lowest dp_index, guarded by strictly positive pre-assignment headroom;
// requests that find no positive-headroom unit are deferred in their
// original queue order. Assignments append to `mapping` in placement order.
void greedy_dispatch(std::span<Request* const> queue, std::vector<DpPlan>& dps,
                     AllocMode mode, std::vector<Placement>& mapping,
                     std::vector<Request*>& deferred);

struct AllocationResult {
  std::vector<Placement> mapping;     // in placement order
  std::vector<Request*> deferred;     // carried to the next cycle, FCFS
  std::vector<Request*> throttled;    // exceeded the wait-cycle limit
  bool flow_control = false;          // true when anything was throttled
};

// One allocation cycle over the target instance's DP units:
//   1. requests deferred by earlier cycles, oldest first;
//   2. newly arrived requests on the residual headroom;
//   3. every request deferred again has wait_cycles incremented, and those
//      beyond n_limit are throttled instead of carried.
// Deferred requests keep their relative arrival order ahead of new ones, so
// admission stays FCFS across cycles.
AllocationResult allocate_batch(std::span<Request* const> q_pending,
                                std::span<Request* const> q_new,
                                std::vector<DpPlan>& dps, int n_limit,
                                AllocMode mode);

}  // namespace sbsim
