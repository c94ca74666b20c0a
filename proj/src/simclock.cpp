/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#include "sbsim/simclock.h"

#include <stdexcept>
#include <string>

namespace sbsim {

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::kRequestArrival: return "RequestArrival";
    case EventKind::kScheduleTick: return "ScheduleTick";
    case EventKind::kEndForward: return "EndForward";
    case EventKind::kWatchdogExpiry: return "WatchdogExpiry";
    case EventKind::kTopologyChange: return "TopologyChange";
    case EventKind::kDecodeStep: return "DecodeStep";
  }
  return "Unknown";
}

void SimClock::schedule(TimeNs t, EventKind kind, EventPayload payload) {
  if (t < now_)
    throw std::logic_error("SimClock::schedule: event time " +
                           std::to_string(t) + " is before now " +
                           std::to_string(now_));
  queue_.push(Event{t, next_seq_++, kind, std::move(payload)});
}

std::size_t SimClock::run_until(
    TimeNs t_end, const std::function<void(const Event&)>& handler) {
  std::size_t processed = 0;
  while (!queue_.empty() && queue_.top().time <= t_end) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    if (trace_ != nullptr) trace_event(ev);
    handler(ev);
    ++processed;
  }
  now_ = t_end;
  return processed;
}

void SimClock::trace_event(const Event& ev) const {
  auto& out = *trace_;
  out << ev.time << '\t' << ev.seq << '\t' << event_kind_name(ev.kind) << '\t';
  std::visit(
      [&out](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ArrivalPayload>) {
          out << "request=" << p.request_id;
        } else if constexpr (std::is_same_v<T, TickPayload>) {
          out << "generation=" << p.generation;
        } else if constexpr (std::is_same_v<T, EndForwardPayload>) {
          out << "instance=" << p.instance_id << " pass=" << p.pass_seq;
        } else if constexpr (std::is_same_v<T, WatchdogPayload>) {
          out << "instance=" << p.instance_id << " generation=" << p.generation;
        } else if constexpr (std::is_same_v<T, TopologyPayload>) {
          out << "instance=" << p.instance_id
              << " healthy=" << (p.healthy ? 1 : 0);
        } else if constexpr (std::is_same_v<T, DecodeStepPayload>) {
          out << "instance=" << p.instance_id << " step=" << p.step_seq;
        }
      },
      ev.payload);
  out << '\n';
}

}  // namespace sbsim
