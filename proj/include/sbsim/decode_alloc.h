/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "sbsim/core.h"

namespace sbsim {

// Percentile with linear interpolation between closest ranks: for n sorted
// values the rank of percentile p is (n - 1) * p / 100. Throws
// std::logic_error on an empty input; p is clamped to [0, 100].
double percentile(std::vector<double> values, double p);

// Upper outlier fence over KV loads: Q3 + k * (Q3 - Q1). Units whose load
// exceeds this are masked from placement while any safe unit remains.
double outlier_threshold(std::span<const Tokens> kv_loads, double k);

// Strict weak order over (B, K): fewer resident requests first, then lighter
// KV load. Callers break remaining ties by unit index.
bool lex_less(const std::pair<int, Tokens>& a, const std::pair<int, Tokens>& b);

// One decode placement candidate. sort_len orders the batch (total sequence
// length, longest first); kv_len is the KV footprint charged at admission
// (the prompt length).
struct DecodeCandidate {
  std::uint64_t request_id = 0;
  Tokens sort_len = 0;
  Tokens kv_len = 0;
};

// Working snapshot of one decode DP unit.
struct DecodeUnitPlan {
  int unit_index = 0;  // position in the caller's unit list
  int batch = 0;       // B
  Tokens kv = 0;       // K
};

// Per-placement trace for tests and diagnostics.
struct DecodePlacementInfo {
  std::uint64_t request_id = 0;
  std::vector<Tokens> kv_snapshot;  // K of every unit at this step
  double threshold = 0.0;
  std::vector<int> safe;            // positions that passed the mask
  bool fallback = false;            // mask emptied, all units considered
  int selected = 0;                 // position selected
};

using DecodeObserver = std::function<void(const DecodePlacementInfo&)>;

// Selects a unit for one request over the working snapshot: recomputes the
// outlier fence from current K loads, masks overloaded units (falling back
// to all units when everything is masked), then takes the lexicographic
// minimum of (B, K) with ties to the lowest position. Returns the position
// in `units`. Does not update the snapshot.
int select_decode_unit(const std::vector<DecodeUnitPlan>& units, double k,
                       std::uint64_t request_id, const DecodeObserver& observe);

// Places a batch: candidates are sorted by sort_len descending (ties by
// request id) and placed one at a time, each placement updating the working
// snapshot (B += 1, K += kv_len) before the fence is recomputed for the
// next. Returns (request_id, unit_index) pairs in placement order.
std::vector<std::pair<std::uint64_t, int>> schedule_decode_batch(
    std::vector<DecodeCandidate> candidates, std::vector<DecodeUnitPlan>& units,
    double k, const DecodeObserver& observe = nullptr);

}  // namespace sbsim
