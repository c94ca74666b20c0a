/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/decode_alloc.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbsim {

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::logic_error("percentile: empty input");
  p = std::clamp(p, 0.0, 100.0);
  std::sort(values.begin(), values.end());
  double rank = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
  auto lo = static_cast<std::size_t>(std::floor(rank));
  auto hi = static_cast<std::size_t>(std::ceil(rank));
  if (lo == hi) return values[lo];
  double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double outlier_threshold(std::span<const Tokens> kv_loads, double k) {
  std::vector<double> v(kv_loads.begin(), kv_loads.end());
  double q1 = percentile(v, 25.0);
  double q3 = percentile(std::move(v), 75.0);
  return q3 + k * (q3 - q1);
}

bool lex_less(const std::pair<int, Tokens>& a,
              const std::pair<int, Tokens>& b) {
  if (a.first != b.first) return a.first < b.first;
  return a.second < b.second;
}

int select_decode_unit(const std::vector<DecodeUnitPlan>& units, double k,
                       std::uint64_t request_id,
                       const DecodeObserver& observe) {
  if (units.empty())
    throw std::logic_error("select_decode_unit: no units");

  std::vector<Tokens> kv;
  kv.reserve(units.size());
  for (const auto& u : units) kv.push_back(u.kv);
  double threshold =
      outlier_threshold(std::span<const Tokens>(kv.data(), kv.size()), k);

  std::vector<int> safe;
  for (std::size_t i = 0; i < units.size(); ++i)
    if (static_cast<double>(units[i].kv) <= threshold)
      safe.push_back(static_cast<int>(i));
  bool fallback = safe.empty();
  if (fallback) {
    safe.resize(units.size());
    for (std::size_t i = 0; i < units.size(); ++i)
      safe[i] = static_cast<int>(i);
  }

  int best = safe.front();
  for (int pos : safe) {
    auto cand = std::make_pair(units[static_cast<std::size_t>(pos)].batch,
                               units[static_cast<std::size_t>(pos)].kv);
    auto cur = std::make_pair(units[static_cast<std::size_t>(best)].batch,
                              units[static_cast<std::size_t>(best)].kv);
    if (lex_less(cand, cur)) best = pos;
  }

  if (observe) {
    DecodePlacementInfo info;
    info.request_id = request_id;
    info.kv_snapshot = kv;
    info.threshold = threshold;
    info.safe = safe;
    info.fallback = fallback;
    info.selected = best;
    observe(info);
  }
  return best;
}

std::vector<std::pair<std::uint64_t, int>> schedule_decode_batch(
    std::vector<DecodeCandidate> candidates,
    std::vector<DecodeUnitPlan>& units, double k,
    const DecodeObserver& observe) {
  // Longest total sequences place first, filling the emptiest units while
  // the spread across units is widest.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const DecodeCandidate& a, const DecodeCandidate& b) {
                     if (a.sort_len != b.sort_len)
                       return a.sort_len > b.sort_len;
                     return a.request_id < b.request_id;
                   });

  std::vector<std::pair<std::uint64_t, int>> placements;
  placements.reserve(candidates.size());
  for (const auto& cand : candidates) {
    int pos = select_decode_unit(units, k, cand.request_id, observe);
    auto& unit = units[static_cast<std::size_t>(pos)];
    unit.batch += 1;
    unit.kv += cand.kv_len;
    placements.emplace_back(cand.request_id, unit.unit_index);
  }
  return placements;
}

}  // namespace sbsim
