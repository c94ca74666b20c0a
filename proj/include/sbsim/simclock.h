/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <queue>
#include <variant>
#include <vector>

#include "sbsim/core.h"

namespace sbsim {

enum class EventKind {
  kRequestArrival,
  kScheduleTick,
  kEndForward,
  kWatchdogExpiry,
  kTopologyChange,
  kDecodeStep,
};

const char* event_kind_name(EventKind kind);

struct ArrivalPayload {
  std::uint64_t request_id = 0;
};

struct TickPayload {
  std::uint64_t generation = 0;
};

struct EndForwardPayload {
  int instance_id = 0;
  std::uint64_t pass_seq = 0;
};

struct WatchdogPayload {
  int instance_id = 0;
  std::uint64_t generation = 0;
};

struct TopologyPayload {
  int instance_id = 0;
  bool healthy = true;
};

struct DecodeStepPayload {
  int instance_id = 0;
  std::uint64_t step_seq = 0;
};

using EventPayload =
    std::variant<ArrivalPayload, TickPayload, EndForwardPayload,
                 WatchdogPayload, TopologyPayload, DecodeStepPayload>;

struct Event {
  TimeNs time = 0;
  std::uint64_t seq = 0;  // insertion order, breaks timestamp ties
  EventKind kind = EventKind::kRequestArrival;
  EventPayload payload;
};

// Deterministic discrete-event clock. Events fire in (time, seq)
// lexicographic order; seq is assigned at insertion, so two events scheduled
// for the same instant fire in the order they were scheduled.
class SimClock {
 public:
  TimeNs now() const { return now_; }
  bool empty() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }

  // Throws std::logic_error if t is in the past.
  void schedule(TimeNs t, EventKind kind, EventPayload payload);

  // Processes every event with time <= t_end in order, invoking handler on
  // each; afterwards now() == t_end. Returns the number of events processed.
  std::size_t run_until(TimeNs t_end,
                        const std::function<void(const Event&)>& handler);

  // Optional tab-separated trace of every processed event.
  void set_trace(std::ostream* sink) { trace_ = sink; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  void trace_event(const Event& ev) const;

  TimeNs now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::ostream* trace_ = nullptr;
};

}  // namespace sbsim
