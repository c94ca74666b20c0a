/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <span>
#include <vector>

#include "sbsim/core.h"
#include "sbsim/simclock.h"

namespace sbsim {

// Requests are stored in one table indexed by request id.
using RequestTable = std::vector<Request>;

// Straggler-gated prefill pass latency in seconds: every DP unit waits for
// the slowest one, so the pass costs base + per_token * max(loads).
// Throws std::logic_error on an empty load span.
double prefill_forward_time(std::span<const Tokens> dp_token_loads,
                            const EngineCoefficients& coeff);

struct DecodeLoad {
  int batch = 0;     // B: resident requests
  Tokens kv = 0;     // K: resident KV tokens
};

// Synchronized decode step latency in seconds:
// base + max(per_request * B + per_kv * K) over the instance's DP units.
double decode_step_time(std::span<const DecodeLoad> dp_states,
                        const EngineCoefficients& coeff);

/* ============================ prefill engine =========================== */

// Buffers dispatched prefill work on a DP unit. Tokens dispatched to an idle
// engine sit in u_flight until the pass that starts right away picks them
// up; tokens dispatched to a busy engine are device-side backlog (r_queued).
void dispatch_prefill(InstanceState& inst, int dp_index, const Request& req,
                      Tokens tokens);

// Begin-of-pass record, one per DP unit with the tokens it computes.
struct PassBegin {
  TimeNs time = 0;
  int instance_id = 0;
  std::uint64_t pass_seq = 0;
  std::vector<Tokens> dp_assigned;  // tokens entering the pass, per DP
  double duration_s = 0.0;
};

// Starts a forward pass if the instance is idle, responsive, and has
// buffered work. Each DP contributes up to c_chunk tokens, consumed FIFO;
// whatever does not fit stays behind as r_queued for the next pass.
// Schedules the EndForward event and stamps prefill_start on requests whose
// first chunk entered this pass. Returns the begin record, or nullopt if no
// pass started.
std::optional<PassBegin> try_begin_prefill_pass(InstanceState& inst,
                                                RequestTable& requests,
                                                const EngineCoefficients& coeff,
                                                SimClock& clock);

struct PassResult {
  TimeNs measured = 0;  // wall time of the pass, nanoseconds
  std::vector<std::uint64_t> finished;  // requests whose prefill completed
  Tokens backlog_remaining = 0;         // r_queued summed over DP units
};

// Completes the running pass: credits computed tokens to requests and
// reports the ones whose prefill finished (their first token is produced at
// this instant). The caller decides what happens next (gated restart,
// decode handoff, scheduler notification).
PassResult finish_prefill_pass(InstanceState& inst, RequestTable& requests,
                               TimeNs now);

/* ============================ decode engine ============================ */

// Makes a request resident on a decode DP unit: B grows by one and K by the
// request's prompt length (its KV footprint at admission).
void admit_decode(InstanceState& inst, int dp_index, Request& req);

// Starts a decode step over the current residents if the instance is idle
// and has any. Residents are stamped with the step sequence so that requests
// admitted while the step runs join the next one. Returns true if a step
// started.
bool try_begin_decode_step(InstanceState& inst, RequestTable& requests,
                           const EngineCoefficients& coeff, SimClock& clock);

struct StepResult {
  Tokens generated = 0;                 // output tokens produced this step
  std::vector<std::uint64_t> finished;  // requests that completed
};

// Completes the running step: every request captured at step begin advances
// by up to tokens_per_step output tokens, K grows accordingly, and finished
// requests release B and their full K contribution.
StepResult finish_decode_step(InstanceState& inst, RequestTable& requests,
                              Tokens tokens_per_step, TimeNs now);

}  // namespace sbsim
