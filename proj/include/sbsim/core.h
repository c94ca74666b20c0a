/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <list>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sbsim {

// Simulated time is integer nanoseconds. Integer timestamps keep event
// ordering exact and make reruns byte-reproducible.
using TimeNs = std::int64_t;
using Tokens = std::int64_t;

constexpr TimeNs kNsPerSec = 1'000'000'000;

inline TimeNs seconds_to_ns(double s) {
  return static_cast<TimeNs>(std::llround(s * 1e9));
}

inline double ns_to_seconds(TimeNs t) {
  return static_cast<double>(t) / 1e9;
}

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/* ============================ requests ============================ */

enum class RequestStatus {
  kPending,     // arrived, not yet dispatched
  kDispatched,  // handed to an instance, waiting for its first pass
  kPrefilling,  // at least one chunk has entered a forward pass
  kDecoding,    // resident on a decode DP unit
  kCompleted,
  kThrottled,   // rejected by flow control after exceeding the wait limit
};

struct Request {
  std::uint64_t id = 0;
  TimeNs arrival_time = 0;
  Tokens prompt_len = 0;
  Tokens output_len = 0;
  int wait_cycles = 0;  // allocation cycles spent deferred

  // Shared prefix token ids, empty when the request shares nothing.
  std::vector<std::int32_t> prefix_tokens;

  RequestStatus status = RequestStatus::kPending;

  std::optional<TimeNs> dispatch_time;
  std::optional<TimeNs> prefill_start;
  std::optional<TimeNs> first_token_time;
  std::optional<TimeNs> completion_time;

  // Prefill progress in compute tokens (prompt minus prefix-cache hit).
  Tokens compute_total = 0;
  Tokens compute_done = 0;
  // Output tokens produced while resident on a decode unit. The first output
  // token is produced by the final prefill pass, so decode owes output_len-1.
  Tokens decode_done = 0;
  // Stamp of the decode step this request is advancing in; requests admitted
  // mid-step carry an older stamp and sit the step out.
  std::uint64_t decode_step_mark = 0;

  Tokens decode_target() const {
    return output_len > 0 ? output_len - 1 : 0;
  }
};

/* ============================ prefix cache ============================ */

// Hash-keyed stub of a per-DP prefix cache. Tracks which prefix lengths are
// resident; capacity is a token budget with LRU eviction. No token data is
// stored, only hashes of the first k tokens for configured probe lengths.
class PrefixCache {
 public:
  PrefixCache() = default;
  PrefixCache(std::vector<Tokens> probe_lens, Tokens budget_tokens);

  // Longest configured probe length k <= prompt_len such that the first k
  // tokens of `prefix` are cached. Returns 0 on miss or empty prefix.
  Tokens longest_hit(const std::vector<std::int32_t>& prefix,
                     Tokens prompt_len) const;

  // Registers the prefix at every probe length it covers.
  void insert(const std::vector<std::int32_t>& prefix, Tokens prompt_len);

  Tokens used_tokens() const { return used_; }

 private:
  static std::uint64_t hash_prefix(const std::vector<std::int32_t>& prefix,
                                   Tokens k);
  void touch(std::uint64_t key);
  void evict_to_budget();

  std::vector<Tokens> probe_lens_;  // ascending
  Tokens budget_ = 0;
  Tokens used_ = 0;
  // Front of the list is most recently used.
  std::list<std::pair<std::uint64_t, Tokens>> lru_;
  std::unordered_map<std::uint64_t,
                     std::list<std::pair<std::uint64_t, Tokens>>::iterator>
      index_;
};

/* ============================ DP unit state ============================ */

struct DpId {
  int instance_id = 0;
  int local_index = 0;
};

// One request's buffered prefill work on a DP unit.
struct PendingChunk {
  std::uint64_t request_id = 0;
  Tokens tokens = 0;
  bool backlog = false;  // counted in r_queued instead of u_flight
};

struct DpUnitState {
  DpId dp_id;
  Tokens c_chunk = 0;

  // Prefill-side token accounting. u_flight covers tokens dispatched to an
  // idle engine that the next pass will pick up; r_queued is device-side
  // backlog (dispatched while busy, or chunk overflow from an earlier pass).
  Tokens u_flight = 0;
  Tokens r_queued = 0;
  std::deque<PendingChunk> pending;

  // Decode-side residency.
  int batch_size = 0;   // B: resident decode requests
  Tokens kv_load = 0;   // K: resident KV tokens
  std::vector<std::uint64_t> residents;

  PrefixCache cache;

  // Dispatchable headroom; negative when backlog exceeds one chunk.
  Tokens c_avail() const { return c_chunk - u_flight - r_queued; }
};

/* ============================ instance state ========================== */

enum class InstanceRole { kPrefill, kDecode };

// One request's share of a running forward pass.
struct PassShare {
  std::uint64_t request_id = 0;
  Tokens tokens = 0;
};

struct InstanceState {
  int instance_id = 0;
  InstanceRole role = InstanceRole::kPrefill;
  std::vector<DpUnitState> dp_units;
  bool healthy = true;
  bool dead = false;  // fault injection: engine stops responding entirely

  // Engine execution state. busy is true iff exactly one forward pass is
  // executing; passes are non-preemptive.
  bool busy = false;
  TimeNs pass_started = 0;
  std::uint64_t pass_seq = 0;
  std::vector<std::vector<PassShare>> pass_content;  // per DP
  std::vector<Tokens> pass_loads;                    // per DP token load

  // Decode stepping state.
  bool stepping = false;
  std::uint64_t step_seq = 0;
  std::vector<std::uint64_t> step_snapshot;

  // Scheduler-side view, updated only by dispatches and acknowledged
  // end-of-forward signals so that lost signals leave it stale.
  int task_depth = 0;            // dispatched batches not yet acknowledged
  bool end_forward_seen = false; // signal received since the last dispatch
  bool watchdog_fired = false;   // liveness reset since the last dispatch
  std::optional<TimeNs> watchdog_deadline;
  std::uint64_t watchdog_generation = 0;

  bool quiescent() const { return task_depth == 0 && !busy; }
};

/* ============================ scheduler state ========================== */

struct SchedulerState {
  // Sliding window of measured forward times, newest at the back.
  std::deque<TimeNs> exec_window;
  std::size_t w_size = 64;
  TimeNs t_default = 0;
  TimeNs t_fwd_bar = 0;  // mean of exec_window, t_default when empty
  TimeNs l_net = 0;
  int n_active = 0;
  TimeNs i_opt = 0;

  // Q_pending: requests deferred by earlier allocation cycles (FCFS head).
  // Q_new: arrivals buffered since the last dispatch.
  std::deque<std::uint64_t> q_pending;
  std::deque<std::uint64_t> q_new;

  std::optional<TimeNs> last_dispatch;
  int last_dispatched_instance = -1;
  std::uint64_t tick_generation = 0;
  std::uint64_t rejected_samples = 0;

  std::size_t queued_total() const { return q_pending.size() + q_new.size(); }
};

/* ============================ cluster config ========================== */

struct EngineCoefficients {
  double prefill_base_s = 0.0;
  double prefill_per_token_s = 0.0;
  double decode_base_s = 0.0;
  double decode_per_request_s = 0.0;
  double decode_per_kv_token_s = 0.0;
};

struct CacheSettings {
  bool enabled = false;
  std::vector<Tokens> probe_lens;
  Tokens budget_tokens = 0;
};

struct ClusterConfig {
  int n_instances_prefill = 1;
  int n_instances_decode = 1;
  int dp_degree = 1;
  int dp_degree_decode = 0;  // 0 means: same as dp_degree
  Tokens c_chunk = 1;

  double t_default_s = 0.1;        // forward-time prior before measurements
  std::size_t w_size = 64;         // sliding window capacity
  double l_net_s = 0.0;            // dispatch network latency
  int n_limit = 8;                 // deferral cycles before flow control
  double iqr_k = 1.5;              // outlier fence multiplier
  double watchdog_multiplier = 5.0;

  EngineCoefficients engine;

  Tokens decode_tokens_per_step = 1;
  int decode_max_batch_per_dp = 0;  // 0 means: unbounded

  CacheSettings cache;

  int effective_dp_decode() const {
    return dp_degree_decode > 0 ? dp_degree_decode : dp_degree;
  }
};

// Validates the config, throws ConfigError naming the offending field.
void validate(const ClusterConfig& config);

struct Cluster {
  SchedulerState scheduler;
  std::vector<InstanceState> instances;  // prefill pool first, then decode

  std::vector<InstanceState*> prefill_pool();
  std::vector<InstanceState*> decode_pool();
};

// Builds idle instances and a scheduler seeded with t_default; the initial
// interval is (t_default + l_net) / n_prefill.
Cluster new_cluster(const ClusterConfig& config);

}  // namespace sbsim
