/* Copyright 2026 The sbsim Authors.  All rights reserved.

==============================================================================*/

// Config-driven experiment runner. Subcommands:
//   run      one experiment, reports written to --out
//   sweep    rate ladder at percentages of a reference peak QPS
//   compare  several schedulers on the identical workload
//   peak     bisection for the highest rate meeting a TTFT SLO
// Exit codes: 0 ok, 1 config/usage error, 2 SLO or search failure,
// 3 internal invariant violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbsim/config.h"
#include "sbsim/simulation.h"

namespace {

using namespace sbsim;

std::optional<SchedulerPolicy> parse_policy(const std::string& name) {
  if (name == "sbs") return SchedulerPolicy::kSbs;
  if (name == "immediate") return SchedulerPolicy::kImmediate;
  if (name == "round_robin") return SchedulerPolicy::kRoundRobin;
  if (name == "least_outstanding") return SchedulerPolicy::kLeastOutstanding;
  return std::nullopt;
}

void print_run_line(const char* label, const Aggregates& agg) {
  std::printf(
      "%s: %zu arrived, %zu completed, mean TTFT %.4f s "
      "(sched %.4f + device %.4f), chunk util %.3f, %.1f tok/s\n",
      label, agg.generated, agg.completed, agg.ttft_mean_s,
      agg.scheduler_wait_mean_s, agg.device_wait_mean_s, agg.chunk_util_mean,
      agg.output_tokens_per_s);
}

int do_run(const std::string& config_path,
           const std::optional<std::uint64_t>& seed,
           const std::string& out_dir) {
  ExperimentConfig config = load_config_file(config_path);
  if (seed) config.sim.seed = *seed;
  SimulationResult result = run_experiment(config);
  write_outputs(config, result, out_dir);
  print_run_line(out_dir.c_str(), result.aggregates);
  return 0;
}

int do_sweep(const std::string& config_path,
             const std::optional<std::uint64_t>& seed,
             const std::string& out_dir, std::vector<double> loads,
             double peak_override) {
  ExperimentConfig config = load_config_file(config_path);
  if (seed) config.sim.seed = *seed;
  double peak = peak_override > 0 ? peak_override : config.reference_peak_qps;
  if (peak <= 0)
    throw ConfigError(
        "sweep needs a reference peak: set workload.reference_peak_qps or "
        "pass --peak");
  for (double load : loads) {
    if (load <= 0) throw ConfigError("sweep: loads must be positive");
    ExperimentConfig point = config;
    point.workload.rate_qps = peak * load / 100.0;
    SimulationResult result = run_experiment(point);
    std::string dir =
        out_dir + "/load_" + std::to_string(static_cast<long>(load));
    write_outputs(point, result, dir);
    print_run_line(dir.c_str(), result.aggregates);
  }
  return 0;
}

int do_compare(const std::string& config_path,
               const std::optional<std::uint64_t>& seed,
               const std::string& out_dir,
               const std::vector<std::string>& schedulers) {
  ExperimentConfig config = load_config_file(config_path);
  if (seed) config.sim.seed = *seed;
  for (const std::string& name : schedulers) {
    auto policy = parse_policy(name);
    if (!policy) throw ConfigError("compare: unknown scheduler " + name);
    ExperimentConfig variant = config;
    variant.policy = *policy;
    SimulationResult result = run_experiment(variant);
    std::string dir = out_dir + "/" + name;
    write_outputs(variant, result, dir);
    print_run_line(dir.c_str(), result.aggregates);
  }
  return 0;
}

int do_peak(const std::string& config_path,
            const std::optional<std::uint64_t>& seed,
            const std::string& out_dir, double slo_ttft, double rate_min,
            double rate_max, double resolution) {
  ExperimentConfig config = load_config_file(config_path);
  if (seed) config.sim.seed = *seed;
  PeakResult peak = find_peak_qps(config, slo_ttft, rate_min, rate_max,
                                  resolution);

  nlohmann::ordered_json out;
  out["slo_ttft_s"] = slo_ttft;
  out["rate_min"] = rate_min;
  out["rate_max"] = rate_max;
  out["resolution"] = resolution;
  out["attainable"] = peak.attainable;
  out["peak_qps"] = peak.peak_qps;
  out["probes"] = nlohmann::ordered_json::array();
  for (const PeakProbe& p : peak.probes) {
    nlohmann::ordered_json probe;
    probe["rate_qps"] = p.rate_qps;
    probe["ttft_mean_s"] = p.ttft_mean_s;
    probe["window_requests"] = p.window_requests;
    probe["feasible"] = p.feasible;
    out["probes"].push_back(probe);
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream file(std::filesystem::path(out_dir) / "peak.json",
                     std::ios::binary);
  file << out.dump(2) << "\n";

  if (!peak.attainable) {
    std::fprintf(stderr, "peak: SLO %.3f s unattainable at rate %.3f\n",
                 slo_ttft, rate_min);
    return 2;
  }
  std::printf("peak: %.3f req/s within TTFT SLO %.3f s (%zu probes)\n",
              peak.peak_qps, slo_ttft, peak.probes.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for staggered batch scheduling"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    cmd->add_option("--seed", seed, "override sim.seed");
    cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run);

  std::vector<double> loads{40, 60, 80, 100};
  double peak_override = 0.0;
  CLI::App* sweep =
      app.add_subcommand("sweep", "rate ladder at %% of the reference peak");
  add_common(sweep);
  sweep->add_option("--loads", loads, "load points, %% of peak")
      ->delimiter(',');
  sweep->add_option("--peak", peak_override,
                    "reference peak QPS (overrides the config)");

  std::vector<std::string> schedulers{"sbs", "immediate"};
  CLI::App* compare =
      app.add_subcommand("compare", "schedulers on the identical workload");
  add_common(compare);
  compare->add_option("--schedulers", schedulers, "scheduler list")
      ->delimiter(',');

  double slo_ttft = 0.0, rate_min = 1.0, rate_max = 256.0, resolution = 1.0;
  CLI::App* peak =
      app.add_subcommand("peak", "highest rate meeting a TTFT SLO");
  add_common(peak);
  peak->add_option("--slo-ttft", slo_ttft, "mean TTFT bound, seconds")
      ->required();
  peak->add_option("--rate-min", rate_min, "search floor, req/s");
  peak->add_option("--rate-max", rate_max, "search ceiling, req/s");
  peak->add_option("--resolution", resolution, "rate resolution, req/s");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return do_run(config_path, seed, out_dir);
    if (sweep->parsed())
      return do_sweep(config_path, seed, out_dir, loads, peak_override);
    if (compare->parsed())
      return do_compare(config_path, seed, out_dir, schedulers);
    if (peak->parsed())
      return do_peak(config_path, seed, out_dir, slo_ttft, rate_min, rate_max,
                     resolution);
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const sbsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::logic_error& e) {
    std::fprintf(stderr, "internal invariant violated: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
