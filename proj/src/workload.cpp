/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/workload.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbsim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Standard normal via Box-Muller. Always consumes exactly two draws, so the
// stream stays aligned no matter which branches callers take.
double standard_normal(std::mt19937_64& rng) {
  double a = u01(rng);
  double b = u01(rng);
  double r = std::sqrt(-2.0 * std::log(1.0 - a));
  return r * std::cos(kTwoPi * b);
}

double exponential(std::mt19937_64& rng, double rate) {
  return -std::log(1.0 - u01(rng)) / rate;
}

// Deterministic token id for position i of pool prefix p.
std::int32_t prefix_token(int pool_id, Tokens i) {
  std::uint64_t h = 1469598103934665603ull;
  h ^= static_cast<std::uint64_t>(pool_id) * 0x9e3779b97f4a7c15ull;
  h ^= static_cast<std::uint64_t>(i) + 0x632be59bd9b4e019ull;
  h *= 1099511628211ull;
  return static_cast<std::int32_t>(h & 0x7fffffff);
}

}  // namespace

double u01(std::mt19937_64& rng) {
  // 53 random bits mapped to [0, 1); bit-stable across platforms.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Tokens sample_length(const LengthSpec& spec, std::mt19937_64& rng) {
  switch (spec.dist) {
    case LengthDist::kConstant:
      return std::max<Tokens>(1, spec.value);
    case LengthDist::kUniformInt: {
      Tokens lo = std::max<Tokens>(1, spec.min);
      Tokens hi = std::max(lo, spec.max);
      auto span = static_cast<double>(hi - lo + 1);
      auto off = static_cast<Tokens>(u01(rng) * span);
      return lo + std::min(off, hi - lo);
    }
    case LengthDist::kLognormalClamped: {
      double v = std::exp(spec.mu + spec.sigma * standard_normal(rng));
      auto t = static_cast<Tokens>(std::llround(v));
      t = std::clamp(t, std::max<Tokens>(1, spec.min), spec.max);
      return t;
    }
  }
  throw std::logic_error("sample_length: unknown distribution");
}

std::vector<Request> generate_workload(const WorkloadSpec& spec,
                                       std::uint64_t seed) {
  if (spec.rate_qps <= 0) throw ConfigError("workload rate_qps must be > 0");
  if (spec.duration_s <= 0)
    throw ConfigError("workload duration_s must be > 0");
  if (spec.shared_prefix_fraction < 0 || spec.shared_prefix_fraction > 1)
    throw ConfigError("shared_prefix_fraction must be in [0, 1]");
  if (spec.shared_prefix_fraction > 0 &&
      (spec.prefix_pool <= 0 || spec.prefix_len <= 0))
    throw ConfigError(
        "prefix_pool and prefix_len must be positive when shared prefixes "
        "are enabled");
  if (spec.initial_burst < 0)
    throw ConfigError("workload initial_burst must be >= 0");

  std::mt19937_64 rng(seed);
  std::vector<Request> out;
  TimeNs horizon = seconds_to_ns(spec.duration_s);
  double slot = 1.0 / spec.rate_qps;

  std::vector<double> arrivals(static_cast<std::size_t>(spec.initial_burst),
                               0.0);
  switch (spec.process) {
    case ArrivalProcess::kPoisson: {
      double t = exponential(rng, spec.rate_qps);
      while (t < spec.duration_s) {
        arrivals.push_back(t);
        t += exponential(rng, spec.rate_qps);
      }
      break;
    }
    case ArrivalProcess::kUniform: {
      for (std::size_t n = 0;; ++n) {
        double t = static_cast<double>(n) * slot;
        if (t >= spec.duration_s) break;
        arrivals.push_back(t);
      }
      break;
    }
    case ArrivalProcess::kUniformJitter: {
      for (std::size_t n = 0;; ++n) {
        double base = static_cast<double>(n) * slot;
        if (base >= spec.duration_s) break;
        double t = base + u01(rng) * slot;
        if (t < spec.duration_s) arrivals.push_back(t);
      }
      break;
    }
  }

  out.reserve(arrivals.size());
  for (double t : arrivals) {
    Request req;
    req.id = out.size();
    req.arrival_time = std::min(seconds_to_ns(t), horizon - 1);
    req.prompt_len = sample_length(spec.prompt, rng);
    // A constant output of zero means prefill-only requests; every other
    // distribution produces at least one output token.
    if (spec.output.dist == LengthDist::kConstant)
      req.output_len = std::max<Tokens>(0, spec.output.value);
    else
      req.output_len = sample_length(spec.output, rng);
    if (spec.shared_prefix_fraction > 0 &&
        u01(rng) < spec.shared_prefix_fraction) {
      int pool_id = static_cast<int>(u01(rng) *
                                     static_cast<double>(spec.prefix_pool));
      pool_id = std::min(pool_id, spec.prefix_pool - 1);
      Tokens len = std::min(spec.prefix_len, req.prompt_len);
      req.prefix_tokens.reserve(static_cast<std::size_t>(len));
      for (Tokens i = 0; i < len; ++i)
        req.prefix_tokens.push_back(prefix_token(pool_id, i));
    }
    out.push_back(std::move(req));
  }
  return out;
}

std::uint64_t workload_digest(const std::vector<Request>& requests) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const auto& req : requests) {
    mix(static_cast<std::uint64_t>(req.arrival_time));
    mix(static_cast<std::uint64_t>(req.prompt_len));
    mix(static_cast<std::uint64_t>(req.output_len));
    mix(req.prefix_tokens.empty()
            ? 0
            : static_cast<std::uint64_t>(req.prefix_tokens.front()) + 1);
    mix(static_cast<std::uint64_t>(req.prefix_tokens.size()));
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  static const char* kHex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[digest & 0xf];
    digest >>= 4;
  }
  return out;
}

}  // namespace sbsim
