/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sbsim/core.h"

namespace sbsim {

enum class ArrivalProcess {
  kPoisson,        // exponential gaps at the configured rate
  kUniform,        // exactly periodic, one arrival every 1/rate
  kUniformJitter,  // one arrival per 1/rate slot, uniform within the slot
};

enum class LengthDist { kConstant, kUniformInt, kLognormalClamped };

struct LengthSpec {
  LengthDist dist = LengthDist::kConstant;
  Tokens value = 1;      // constant
  Tokens min = 1;        // uniform / clamp bounds
  Tokens max = 1;
  double mu = 0.0;       // lognormal location
  double sigma = 1.0;    // lognormal scale
};

struct WorkloadSpec {
  ArrivalProcess process = ArrivalProcess::kPoisson;
  double rate_qps = 1.0;
  double duration_s = 1.0;
  LengthSpec prompt;
  LengthSpec output;
  // Fraction of requests drawing a shared prefix from a fixed pool.
  double shared_prefix_fraction = 0.0;
  int prefix_pool = 0;
  Tokens prefix_len = 0;
  // Extra requests arriving at t=0 ahead of the stream, to warm-start the
  // cluster into a saturated state before steady-state arrivals.
  int initial_burst = 0;
};

// Deterministic uniform double in [0, 1).
double u01(std::mt19937_64& rng);

// Samples one length: lognormal values are rounded and clamped to
// [min, max]; every distribution returns at least 1 token.
Tokens sample_length(const LengthSpec& spec, std::mt19937_64& rng);

// Materializes the full arrival stream, sorted by arrival time, ids assigned
// in arrival order. The same spec and seed always produce the same stream.
std::vector<Request> generate_workload(const WorkloadSpec& spec,
                                       std::uint64_t seed);

// Order-sensitive digest of the stream (arrival times, lengths, prefixes);
// two runs share a workload iff their digests match.
std::uint64_t workload_digest(const std::vector<Request>& requests);

std::string digest_hex(std::uint64_t digest);

}  // namespace sbsim
