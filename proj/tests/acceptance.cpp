/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

// End-to-end acceptance checks over the committed scenario configs. Each
// check prints exactly one [PASS]/[FAIL] line with the measured values and
// its wall-clock budget; the process exits nonzero when any check fails.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sbsim/config.h"
#include "sbsim/decode_alloc.h"
#include "sbsim/interval_control.h"
#include "sbsim/prefill_alloc.h"
#include "sbsim/simulation.h"
#include "support/pbaa_oracle.h"

namespace {

using namespace sbsim;

// Operating points for the contention scenario, frozen with the committed
// engine coefficients. The tight SLO probes saturation behavior; the wide
// SLO anchors the mid-load comparison point.
constexpr double kSloTightS = 0.58;
constexpr double kSloWideS = 0.70;
constexpr double kRateFloor = 50.0;
constexpr double kRateCeiling = 900.0;
constexpr double kRateResolution = 2.0;

struct CheckResult {
  bool pass = false;
  std::string detail;
  double budget_s = 0.0;
  double elapsed_s = 0.0;
};

std::string config_path(const char* name) {
  return std::string(SBSIM_CONFIG_DIR) + "/" + name;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  vsnprintf(buffer, sizeof buffer, format, args);
  va_end(args);
  return std::string(buffer);
}

/* ------------------------- 1. wait-shift oracle ------------------------ */

CheckResult check_wait_oracle() {
  CheckResult r;
  r.budget_s = 5.0;
  ExperimentConfig cfg = load_config_file(config_path("oracle_n8.json"));

  cfg.policy = SchedulerPolicy::kImmediate;
  double wait_imm = run_experiment(cfg).aggregates.total_wait_mean_s;
  cfg.policy = SchedulerPolicy::kSbs;
  double wait_sbs = run_experiment(cfg).aggregates.total_wait_mean_s;

  bool imm_ok = wait_imm >= 0.45 && wait_imm <= 0.55;
  bool sbs_ok = wait_sbs >= 0.05625 && wait_sbs <= 0.06875;
  r.pass = imm_ok && sbs_ok;
  r.detail = fmt("immediate wait %.4f s in [0.45,0.55] %s; "
                 "staggered wait %.4f s in [0.05625,0.06875] %s",
                 wait_imm, imm_ok ? "ok" : "MISS", wait_sbs,
                 sbs_ok ? "ok" : "MISS");
  return r;
}

/* --------------------- 2. mid-load latency reduction ------------------- */

CheckResult check_midload_latency() {
  CheckResult r;
  r.budget_s = 60.0;
  ExperimentConfig cfg = load_config_file(config_path("short_3k.json"));

  cfg.policy = SchedulerPolicy::kImmediate;
  PeakResult peak = find_peak_qps(cfg, kSloWideS, kRateFloor, kRateCeiling,
                                  kRateResolution);
  if (!peak.attainable) {
    r.detail = "baseline peak search failed at the wide SLO";
    return r;
  }
  cfg.workload.rate_qps = 0.6 * peak.peak_qps;

  cfg.policy = SchedulerPolicy::kImmediate;
  Aggregates base = run_experiment(cfg).aggregates;
  cfg.policy = SchedulerPolicy::kSbs;
  Aggregates sbs = run_experiment(cfg).aggregates;

  double ttft_ratio = sbs.ttft_mean_s / base.ttft_mean_s;
  double dev_ratio = sbs.device_wait_mean_s / base.device_wait_mean_s;
  bool ttft_ok = ttft_ratio <= 0.70;
  bool dev_ok = dev_ratio <= 0.20;
  r.pass = ttft_ok && dev_ok;
  r.detail = fmt("baseline peak %.1f req/s, compared at %.1f req/s; "
                 "TTFT %.4f vs %.4f s (ratio %.3f <= 0.70 %s); "
                 "device wait %.4f vs %.4f s (ratio %.3f <= 0.20 %s)",
                 peak.peak_qps, cfg.workload.rate_qps, sbs.ttft_mean_s,
                 base.ttft_mean_s, ttft_ratio, ttft_ok ? "ok" : "MISS",
                 sbs.device_wait_mean_s, base.device_wait_mean_s, dev_ratio,
                 dev_ok ? "ok" : "MISS");
  return r;
}

/* ------------- 3 and 4. utilization and peak at the tight SLO ---------- */

struct SaturationOutcome {
  CheckResult utilization;  // check 3
  CheckResult peak_gain;    // check 4
};

SaturationOutcome check_saturation() {
  SaturationOutcome out;
  out.utilization.budget_s = 60.0;
  out.peak_gain.budget_s = 600.0;
  auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig cfg = load_config_file(config_path("short_3k.json"));

  cfg.policy = SchedulerPolicy::kImmediate;
  PeakResult peak_base = find_peak_qps(cfg, kSloTightS, kRateFloor,
                                       kRateCeiling, kRateResolution);
  cfg.policy = SchedulerPolicy::kSbs;
  PeakResult peak_sbs = find_peak_qps(cfg, kSloTightS, kRateFloor,
                                      kRateCeiling, kRateResolution);
  double peak_elapsed = seconds_since(t0);

  if (!peak_base.attainable || !peak_sbs.attainable) {
    out.peak_gain.detail = "peak search failed at the tight SLO";
    out.peak_gain.elapsed_s = peak_elapsed;
    out.utilization.detail = out.peak_gain.detail;
    return out;
  }

  double gain = peak_sbs.peak_qps / peak_base.peak_qps;
  out.peak_gain.pass = gain >= 1.10;
  out.peak_gain.detail =
      fmt("peak %.1f vs %.1f req/s at a %.2f s SLO (gain %.3fx >= 1.10x %s)",
          peak_sbs.peak_qps, peak_base.peak_qps, kSloTightS, gain,
          out.peak_gain.pass ? "ok" : "MISS");
  out.peak_gain.elapsed_s = peak_elapsed;

  // Utilization is read at each policy's own sustainable operating point:
  // the comparison holds the workload generator and seed fixed while each
  // side runs as hard as its dispatch mode allows.
  auto t1 = std::chrono::steady_clock::now();
  cfg.policy = SchedulerPolicy::kSbs;
  cfg.workload.rate_qps = peak_sbs.peak_qps;
  double util_sbs = run_experiment(cfg).aggregates.chunk_util_mean;
  cfg.policy = SchedulerPolicy::kImmediate;
  cfg.workload.rate_qps = peak_base.peak_qps;
  double util_base = run_experiment(cfg).aggregates.chunk_util_mean;

  bool sbs_ok = util_sbs >= 0.85;
  bool base_ok = util_base <= 0.65;
  out.utilization.pass = sbs_ok && base_ok;
  out.utilization.detail =
      fmt("chunk utilization %.3f >= 0.85 %s (staggered at %.1f req/s) vs "
          "%.3f <= 0.65 %s (baseline at %.1f req/s)",
          util_sbs, sbs_ok ? "ok" : "MISS", peak_sbs.peak_qps, util_base,
          base_ok ? "ok" : "MISS", peak_base.peak_qps);
  out.utilization.elapsed_s = seconds_since(t1);
  return out;
}

/* ------------------- 5 and 6. decode placement quality ------------------ */

struct DecodeOutcome {
  CheckResult balance;     // check 5
  CheckResult throughput;  // check 6
};

DecodeOutcome check_decode() {
  DecodeOutcome out;
  out.balance.budget_s = 60.0;
  out.throughput.budget_s = 60.0;
  auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig cfg = load_config_file(config_path("decode_dp32.json"));
  cfg.decode_policy = DecodePolicy::kIqr;
  Aggregates iqr = run_experiment(cfg).aggregates;
  cfg.decode_policy = DecodePolicy::kRandom;
  Aggregates rnd = run_experiment(cfg).aggregates;
  double elapsed = seconds_since(t0);

  double sigma_ratio = iqr.kv_sigma_time_avg / rnd.kv_sigma_time_avg;
  out.balance.pass = sigma_ratio <= 0.70;
  out.balance.detail =
      fmt("time-averaged KV sigma %.0f vs %.0f tokens "
          "(ratio %.3f <= 0.70 %s)",
          iqr.kv_sigma_time_avg, rnd.kv_sigma_time_avg, sigma_ratio,
          out.balance.pass ? "ok" : "MISS");
  out.balance.elapsed_s = elapsed;

  double tput_ratio = iqr.output_tokens_per_s / rnd.output_tokens_per_s;
  out.throughput.pass = tput_ratio >= 1.05;
  out.throughput.detail =
      fmt("output %.0f vs %.0f tokens/s (ratio %.3f >= 1.05 %s)",
          iqr.output_tokens_per_s, rnd.output_tokens_per_s, tput_ratio,
          out.throughput.pass ? "ok" : "MISS");
  out.throughput.elapsed_s = elapsed;
  return out;
}

/* ------------------------- 7. algorithm audits ------------------------- */

bool audit_interval_exactness(std::string& note) {
  std::mt19937_64 rng(20260822);
  std::uniform_int_distribution<TimeNs> t_bar(1'000'000, 2'000'000'000);
  std::uniform_int_distribution<TimeNs> l_net(0, 100'000'000);
  std::uniform_int_distribution<int> n_active(1, 64);
  for (int i = 0; i < 1000; ++i) {
    SchedulerState st;
    st.exec_window = {t_bar(rng)};
    st.l_net = l_net(rng);
    st.n_active = n_active(rng);
    recompute_interval(st);
    TimeNs target = st.t_fwd_bar + st.l_net;
    TimeNs diff = st.i_opt * st.n_active - target;
    if (diff < -st.n_active || diff > st.n_active || st.i_opt < 1) {
      note = fmt("interval drift %" PRId64 " ns at n=%d", diff, st.n_active);
      return false;
    }
  }
  return true;
}

bool audit_moving_average(std::string& note) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<TimeNs> sample(1, 3'000'000'000);
  for (std::size_t w : {std::size_t{1}, std::size_t{8}, std::size_t{64}}) {
    SchedulerState st;
    st.w_size = w;
    st.n_active = 4;
    std::deque<TimeNs> mirror;
    for (int i = 0; i < 500; ++i) {
      TimeNs t = sample(rng);
      on_end_forward_sample(st, t);
      mirror.push_back(t);
      while (mirror.size() > w) mirror.pop_front();
      TimeNs sum = 0;
      for (TimeNs v : mirror) sum += v;
      TimeNs brute = sum / static_cast<TimeNs>(mirror.size());
      if (st.t_fwd_bar != brute) {
        note = fmt("window mean %" PRId64 " != brute force %" PRId64
                   " at w=%zu step %d",
                   st.t_fwd_bar, brute, w, i);
        return false;
      }
    }
  }
  return true;
}

bool audit_iqr_threshold(std::string& note) {
  auto near = [](double a, double b) { return std::fabs(a - b) < 1e-9; };
  std::vector<Tokens> spread = {10, 20, 30, 40};
  std::vector<Tokens> outlier = {10, 10, 10, 100};
  std::vector<Tokens> flat = {7, 7, 7, 7};
  double th1 = outlier_threshold({spread.data(), spread.size()}, 1.5);
  double th2 = outlier_threshold({outlier.data(), outlier.size()}, 1.5);
  double th3 = outlier_threshold({flat.data(), flat.size()}, 1.5);
  if (!near(th1, 55.0) || !near(th2, 66.25) || !near(th3, 7.0)) {
    note = fmt("thresholds %.4f/%.4f/%.4f, expected 55/66.25/7", th1, th2,
               th3);
    return false;
  }
  if (!near(percentile({10, 20, 30, 40}, 25), 17.5) ||
      !near(percentile({10, 20, 30, 40}, 75), 32.5) ||
      !near(percentile({5}, 90), 5.0)) {
    note = "percentile hand values diverged";
    return false;
  }
  return true;
}

bool audit_lex_order(std::string& note) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> b(0, 4);
  std::uniform_int_distribution<Tokens> k(0, 3);
  auto draw = [&] { return std::pair<int, Tokens>(b(rng), k(rng)); };
  auto equiv = [](const auto& x, const auto& y) {
    return !lex_less(x, y) && !lex_less(y, x);
  };
  for (int i = 0; i < 10'000; ++i) {
    auto x = draw(), y = draw(), z = draw();
    if (lex_less(x, x)) {
      note = "irreflexivity violated";
      return false;
    }
    if (lex_less(x, y) && lex_less(y, x)) {
      note = "asymmetry violated";
      return false;
    }
    if (lex_less(x, y) && lex_less(y, z) && !lex_less(x, z)) {
      note = "transitivity violated";
      return false;
    }
    if (equiv(x, y) && equiv(y, z) && !equiv(x, z)) {
      note = "incomparability transitivity violated";
      return false;
    }
  }
  return true;
}

// Drives the production allocator and the reference reimplementation over
// one instance and compares every observable step.
bool pbaa_case_matches(const std::vector<Tokens>& lens, std::size_t split,
                       int dp_count, Tokens c_chunk, int n_limit,
                       std::string& note) {
  std::vector<Request> storage(lens.size());
  std::vector<Request*> pending, fresh;
  std::vector<testing::OracleRequest> o_pending, o_fresh;
  for (std::size_t i = 0; i < lens.size(); ++i) {
    storage[i].id = i;
    storage[i].prompt_len = lens[i];
    testing::OracleRequest o;
    o.id = i;
    o.len = lens[i];
    if (i < split) {
      pending.push_back(&storage[i]);
      o_pending.push_back(o);
    } else {
      fresh.push_back(&storage[i]);
      o_fresh.push_back(o);
    }
  }
  std::vector<DpPlan> dps(static_cast<std::size_t>(dp_count));
  std::vector<Tokens> caps(static_cast<std::size_t>(dp_count), c_chunk);
  for (int d = 0; d < dp_count; ++d) {
    dps[static_cast<std::size_t>(d)].dp_index = d;
    dps[static_cast<std::size_t>(d)].c_avail = c_chunk;
  }

  AllocationResult got = allocate_batch(
      {pending.data(), pending.size()}, {fresh.data(), fresh.size()}, dps,
      n_limit, AllocMode::kBasic);
  testing::OracleOutcome want =
      testing::oracle_allocate(o_pending, o_fresh, caps, n_limit, false);

  if (got.mapping.size() != want.mapping.size()) {
    note = fmt("mapping size %zu != %zu", got.mapping.size(),
               want.mapping.size());
    return false;
  }
  for (std::size_t i = 0; i < got.mapping.size(); ++i)
    if (got.mapping[i].first->id != want.mapping[i].first ||
        got.mapping[i].second != want.mapping[i].second) {
      note = fmt("placement %zu: got request %" PRIu64 "->dp%d, "
                 "want %" PRIu64 "->dp%d",
                 i, got.mapping[i].first->id, got.mapping[i].second,
                 want.mapping[i].first, want.mapping[i].second);
      return false;
    }
  for (int d = 0; d < dp_count; ++d)
    if (dps[static_cast<std::size_t>(d)].c_avail !=
        want.caps[static_cast<std::size_t>(d)]) {
      note = fmt("dp%d capacity %" PRId64 " != %" PRId64, d,
                 dps[static_cast<std::size_t>(d)].c_avail,
                 want.caps[static_cast<std::size_t>(d)]);
      return false;
    }
  if (got.deferred.size() != want.deferred.size()) {
    note = fmt("deferred size %zu != %zu", got.deferred.size(),
               want.deferred.size());
    return false;
  }
  for (std::size_t i = 0; i < got.deferred.size(); ++i)
    if (got.deferred[i]->id != want.deferred[i] ||
        got.deferred[i]->wait_cycles != want.deferred_wait_cycles[i]) {
      note = fmt("deferred %zu: request %" PRIu64 " cycles %d, want %" PRIu64
                 " cycles %d",
                 i, got.deferred[i]->id, got.deferred[i]->wait_cycles,
                 want.deferred[i], want.deferred_wait_cycles[i]);
      return false;
    }
  if (got.throttled.size() != want.throttled.size()) {
    note = fmt("throttled size %zu != %zu", got.throttled.size(),
               want.throttled.size());
    return false;
  }
  for (std::size_t i = 0; i < got.throttled.size(); ++i)
    if (got.throttled[i]->id != want.throttled[i]) {
      note = fmt("throttled %zu mismatch", i);
      return false;
    }
  if (got.flow_control != want.flow_control) {
    note = "flow control flag mismatch";
    return false;
  }
  return true;
}

bool audit_allocator_grid(std::string& note, std::size_t& cases) {
  constexpr Tokens kChunk = 7;
  const Tokens len_choices[] = {1, 2, 3, 4, 5, kChunk};
  for (int dp_count = 1; dp_count <= 3; ++dp_count) {
    for (std::size_t k = 1; k <= 6; ++k) {
      std::vector<std::size_t> digits(k, 0);
      bool carry = false;
      while (!carry) {
        std::vector<Tokens> lens(k);
        for (std::size_t i = 0; i < k; ++i) lens[i] = len_choices[digits[i]];
        for (std::size_t split : {std::size_t{0}, k / 2, k}) {
          for (int n_limit : {0, 2}) {
            cases += 1;
            if (!pbaa_case_matches(lens, split, dp_count, kChunk, n_limit,
                                   note)) {
              note += fmt(" (dp=%d k=%zu split=%zu n_limit=%d)", dp_count, k,
                          split, n_limit);
              return false;
            }
          }
        }
        std::size_t pos = 0;
        while (pos < k && ++digits[pos] == 6) {
          digits[pos] = 0;
          ++pos;
        }
        carry = pos == k;
      }
    }
  }
  return true;
}

CheckResult check_algorithm_audits() {
  CheckResult r;
  r.budget_s = 30.0;
  std::string note;
  std::size_t grid_cases = 0;

  struct Audit {
    const char* name;
    bool ok;
  };
  std::vector<Audit> audits;
  audits.push_back({"interval", audit_interval_exactness(note)});
  if (audits.back().ok)
    audits.push_back({"moving-average", audit_moving_average(note)});
  if (audits.back().ok)
    audits.push_back({"iqr-threshold", audit_iqr_threshold(note)});
  if (audits.back().ok) audits.push_back({"lex-order", audit_lex_order(note)});
  if (audits.back().ok)
    audits.push_back({"allocator-grid", audit_allocator_grid(note, grid_cases)});

  r.pass = true;
  for (const Audit& a : audits) r.pass = r.pass && a.ok;
  if (r.pass) {
    r.detail = fmt("interval x1000, moving average x1500, IQR hand values, "
                   "lex order x10000, allocator grid x%zu all exact",
                   grid_cases);
  } else {
    r.detail = fmt("%s audit failed: %s", audits.back().name, note.c_str());
  }
  return r;
}

/* -------------------------- 8. watchdog liveness ------------------------ */

CheckResult check_liveness() {
  CheckResult r;
  r.budget_s = 10.0;
  ExperimentConfig cfg = load_config_file(config_path("liveness.json"));
  SimulationResult result = run_experiment(cfg);

  TimeNs t_bar = seconds_to_ns(cfg.cluster.t_default_s);
  TimeNs i_opt = (t_bar + seconds_to_ns(cfg.cluster.l_net_s)) /
                 cfg.cluster.n_instances_prefill;
  TimeNs bound = static_cast<TimeNs>(std::llround(
                     cfg.cluster.watchdog_multiplier *
                     static_cast<double>(t_bar))) +
                 i_opt;

  std::map<int, std::vector<TimeNs>> per_instance;
  for (const auto& [time, instance] : result.metrics.dispatch_log())
    per_instance[instance].push_back(time);

  TimeNs worst = 0;
  int starved = -1;
  for (int id = 0; id < cfg.cluster.n_instances_prefill; ++id) {
    auto it = per_instance.find(id);
    if (it == per_instance.end() || it->second.size() < 2) {
      r.detail = fmt("instance %d received %zu dispatches", id,
                     it == per_instance.end() ? std::size_t{0}
                                              : it->second.size());
      return r;
    }
    const std::vector<TimeNs>& times = it->second;
    TimeNs gap = times.front();  // from suppression start at t=0
    for (std::size_t i = 1; i < times.size(); ++i)
      gap = std::max(gap, times[i] - times[i - 1]);
    if (gap > worst) {
      worst = gap;
      starved = id;
    }
  }

  bool alive = result.aggregates.completed > 0;
  r.pass = worst <= bound && alive;
  r.detail = fmt("max dispatch gap %.4f s (instance %d) <= %.4f s %s; "
                 "%zu watchdog fires; %zu requests completed %s",
                 ns_to_seconds(worst), starved, ns_to_seconds(bound),
                 worst <= bound ? "ok" : "MISS",
                 static_cast<std::size_t>(result.aggregates.watchdog_fires),
                 static_cast<std::size_t>(result.aggregates.completed),
                 alive ? "ok" : "MISS");
  return r;
}

/* ---------------------------- 9. determinism ---------------------------- */

CheckResult check_determinism() {
  CheckResult r;
  r.budget_s = 60.0;
  ExperimentConfig cfg = load_config_file(config_path("short_3k.json"));

  SimulationResult a = run_experiment(cfg);
  SimulationResult b = run_experiment(cfg);

  bool requests_eq = MetricsCollector::requests_csv(a.requests) ==
                     MetricsCollector::requests_csv(b.requests);
  bool passes_eq = a.metrics.passes_csv() == b.metrics.passes_csv();
  bool kv_eq = a.metrics.kvband_csv() == b.metrics.kvband_csv();
  bool control_eq = a.metrics.control_csv() == b.metrics.control_csv();
  bool digest_eq = a.workload_digest == b.workload_digest;

  r.pass = requests_eq && passes_eq && kv_eq && control_eq && digest_eq;
  r.detail = fmt("requests %s, passes %s, kvband %s, control %s, "
                 "workload digest %016" PRIx64 " %s",
                 requests_eq ? "identical" : "DIVERGED",
                 passes_eq ? "identical" : "DIVERGED",
                 kv_eq ? "identical" : "DIVERGED",
                 control_eq ? "identical" : "DIVERGED", a.workload_digest,
                 digest_eq ? "stable" : "UNSTABLE");
  return r;
}

}  // namespace

int main() {
  struct Line {
    int id;
    const char* label;
    CheckResult result;
  };
  std::vector<Line> lines;

  auto timed = [](auto&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    CheckResult r = fn();
    if (r.elapsed_s == 0.0) r.elapsed_s = seconds_since(t0);
    return r;
  };

  lines.push_back({1, "wait-shift oracle", timed(check_wait_oracle)});
  lines.push_back({2, "mid-load latency", timed(check_midload_latency)});
  SaturationOutcome sat = check_saturation();
  lines.push_back({3, "saturation utilization", sat.utilization});
  lines.push_back({4, "peak throughput gain", sat.peak_gain});
  DecodeOutcome dec = check_decode();
  lines.push_back({5, "decode KV balance", dec.balance});
  lines.push_back({6, "decode throughput", dec.throughput});
  lines.push_back({7, "algorithm audits", timed(check_algorithm_audits)});
  lines.push_back({8, "watchdog liveness", timed(check_liveness)});
  lines.push_back({9, "determinism", timed(check_determinism)});

  int failures = 0;
  for (const Line& line : lines) {
    bool in_budget = line.result.elapsed_s <= line.result.budget_s;
    bool pass = line.result.pass && in_budget;
    if (!pass) failures += 1;
    std::printf("[%s] %d. %s: %s (%.1f s of %.0f s budget)\n",
                pass ? "PASS" : "FAIL", line.id, line.label,
                line.result.detail.c_str(), line.result.elapsed_s,
                line.result.budget_s);
  }
  std::printf("%d/%zu acceptance checks passed\n",
              static_cast<int>(lines.size()) - failures, lines.size());
  return failures == 0 ? 0 : 2;
}
