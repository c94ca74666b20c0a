/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/engine_model.h"

#include <algorithm>
#include <stdexcept>

namespace sbsim {

double prefill_forward_time(std::span<const Tokens> dp_token_loads,
                            const EngineCoefficients& coeff) {
  if (dp_token_loads.empty())
    throw std::logic_error("prefill_forward_time: empty DP load set");
  Tokens max_load = 0;
  for (Tokens load : dp_token_loads) max_load = std::max(max_load, load);
  return coeff.prefill_base_s +
         coeff.prefill_per_token_s * static_cast<double>(max_load);
}

double decode_step_time(std::span<const DecodeLoad> dp_states,
                        const EngineCoefficients& coeff) {
  if (dp_states.empty())
    throw std::logic_error("decode_step_time: empty DP state set");
  double worst = 0.0;
  for (const auto& s : dp_states) {
    double t = coeff.decode_per_request_s * static_cast<double>(s.batch) +
               coeff.decode_per_kv_token_s * static_cast<double>(s.kv);
    worst = std::max(worst, t);
  }
  return coeff.decode_base_s + worst;
}

/* ============================ prefill engine =========================== */

void dispatch_prefill(InstanceState& inst, int dp_index, const Request& req,
                      Tokens tokens) {
  if (tokens <= 0) throw std::logic_error("dispatch_prefill: tokens <= 0");
  auto& dp = inst.dp_units.at(static_cast<std::size_t>(dp_index));
  // Work reaching a busy engine queues device-side; an idle engine will pick
  // it up in the pass that begins right away.
  bool backlog = inst.busy;
  dp.pending.push_back(PendingChunk{req.id, tokens, backlog});
  if (backlog)
    dp.r_queued += tokens;
  else
    dp.u_flight += tokens;
}

std::optional<PassBegin> try_begin_prefill_pass(InstanceState& inst,
                                                RequestTable& requests,
                                                const EngineCoefficients& coeff,
                                                SimClock& clock) {
  if (inst.busy || inst.dead) return std::nullopt;
  bool any_work = false;
  for (const auto& dp : inst.dp_units)
    if (!dp.pending.empty()) {
      any_work = true;
      break;
    }
  if (!any_work) return std::nullopt;

  TimeNs now = clock.now();
  PassBegin begin;
  begin.time = now;
  begin.instance_id = inst.instance_id;
  begin.pass_seq = ++inst.pass_seq;
  begin.dp_assigned.assign(inst.dp_units.size(), 0);

  for (std::size_t d = 0; d < inst.dp_units.size(); ++d) {
    auto& dp = inst.dp_units[d];
    auto& content = inst.pass_content[d];
    content.clear();
    Tokens room = dp.c_chunk;
    while (room > 0 && !dp.pending.empty()) {
      auto& head = dp.pending.front();
      Tokens take = std::min(head.tokens, room);
      content.push_back(PassShare{head.request_id, take});
      room -= take;

      auto& req = requests.at(head.request_id);
      if (!req.prefill_start) {
        req.prefill_start = now;
        req.status = RequestStatus::kPrefilling;
      }

      if (head.backlog)
        dp.r_queued -= take;
      else
        dp.u_flight -= take;
      head.tokens -= take;
      if (head.tokens == 0) dp.pending.pop_front();
    }
    // The pass is underway: everything still buffered is device backlog.
    for (auto& chunk : dp.pending) {
      if (!chunk.backlog) {
        dp.u_flight -= chunk.tokens;
        dp.r_queued += chunk.tokens;
        chunk.backlog = true;
      }
    }
    Tokens assigned = dp.c_chunk - room;
    inst.pass_loads[d] = assigned;
    begin.dp_assigned[d] = assigned;
  }

  inst.busy = true;
  inst.pass_started = now;
  begin.duration_s = prefill_forward_time(
      std::span<const Tokens>(inst.pass_loads.data(), inst.pass_loads.size()),
      coeff);
  clock.schedule(now + seconds_to_ns(begin.duration_s), EventKind::kEndForward,
                 EndForwardPayload{inst.instance_id, inst.pass_seq});
  return begin;
}

PassResult finish_prefill_pass(InstanceState& inst, RequestTable& requests,
                               TimeNs now) {
  if (!inst.busy)
    throw std::logic_error("finish_prefill_pass: instance is not busy");
  PassResult result;
  result.measured = now - inst.pass_started;

  for (std::size_t d = 0; d < inst.dp_units.size(); ++d) {
    for (const auto& share : inst.pass_content[d]) {
      auto& req = requests.at(share.request_id);
      req.compute_done += share.tokens;
      if (req.compute_done > req.compute_total)
        throw std::logic_error("finish_prefill_pass: over-credited request");
      if (req.compute_done == req.compute_total)
        result.finished.push_back(req.id);
    }
    inst.pass_content[d].clear();
    inst.pass_loads[d] = 0;
    result.backlog_remaining += inst.dp_units[d].r_queued;
  }

  inst.busy = false;
  return result;
}

/* ============================ decode engine ============================ */

void admit_decode(InstanceState& inst, int dp_index, Request& req) {
  auto& dp = inst.dp_units.at(static_cast<std::size_t>(dp_index));
  dp.residents.push_back(req.id);
  dp.batch_size += 1;
  dp.kv_load += req.prompt_len;
  req.status = RequestStatus::kDecoding;
}

bool try_begin_decode_step(InstanceState& inst, RequestTable& requests,
                           const EngineCoefficients& coeff, SimClock& clock) {
  if (inst.stepping || inst.dead) return false;
  bool any = false;
  for (const auto& dp : inst.dp_units)
    if (!dp.residents.empty()) {
      any = true;
      break;
    }
  if (!any) return false;

  inst.step_seq += 1;
  std::vector<DecodeLoad> loads;
  loads.reserve(inst.dp_units.size());
  for (auto& dp : inst.dp_units) {
    for (std::uint64_t id : dp.residents)
      requests.at(id).decode_step_mark = inst.step_seq;
    loads.push_back(DecodeLoad{dp.batch_size, dp.kv_load});
  }
  double duration = decode_step_time(
      std::span<const DecodeLoad>(loads.data(), loads.size()), coeff);

  inst.stepping = true;
  clock.schedule(clock.now() + seconds_to_ns(duration), EventKind::kDecodeStep,
                 DecodeStepPayload{inst.instance_id, inst.step_seq});
  return true;
}

StepResult finish_decode_step(InstanceState& inst, RequestTable& requests,
                              Tokens tokens_per_step, TimeNs now) {
  if (!inst.stepping)
    throw std::logic_error("finish_decode_step: instance is not stepping");
  StepResult result;

  // Requests admitted after the step began carry an older stamp and do not
  // advance this step.
  for (auto& dp : inst.dp_units) {
    for (std::size_t i = 0; i < dp.residents.size();) {
      auto& req = requests.at(dp.residents[i]);
      if (req.decode_step_mark != inst.step_seq) {
        ++i;
        continue;
      }
      Tokens produced =
          std::min(tokens_per_step, req.decode_target() - req.decode_done);
      req.decode_done += produced;
      dp.kv_load += produced;
      result.generated += produced;
      if (req.decode_done == req.decode_target()) {
        req.completion_time = now;
        req.status = RequestStatus::kCompleted;
        dp.batch_size -= 1;
        dp.kv_load -= req.prompt_len + req.decode_done;
        dp.residents.erase(dp.residents.begin() +
                           static_cast<std::ptrdiff_t>(i));
        result.finished.push_back(req.id);
        continue;  // index i now points at the next resident
      }
      ++i;
    }
  }

  inst.stepping = false;
  return result;
}

}  // namespace sbsim
