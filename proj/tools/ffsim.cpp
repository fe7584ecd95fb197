// ffsim: run, re-analyze and inspect floor-field evacuation experiments.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ffsim/config.hpp"
#include "ffsim/errors.hpp"
#include "ffsim/experiment.hpp"
#include "ffsim/output.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Overrides {
  std::string config_path;
  std::optional<std::string> scenario;
  std::optional<std::string> occupancy;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

ffsim::ExperimentConfig load_config(const Overrides& o) {
  ffsim::ExperimentConfig config;
  if (!o.config_path.empty()) {
    std::string text;
    try {
      text = ffsim::read_file(o.config_path);
    } catch (const std::exception& ex) {
      throw ffsim::ConfigError(ex.what());
    }
    config = ffsim::parse_config(text);
  }
  if (o.scenario) ffsim::set_config_value(config, "scenario", *o.scenario);
  if (o.occupancy) ffsim::set_config_value(config, "occupancy", *o.occupancy);
  if (o.reps) config.repetitions = *o.reps;
  if (o.seed) config.seed_base = *o.seed;
  if (o.out) config.output_dir = *o.out;
  ffsim::validate(config);
  return config;
}

int cmd_run(const Overrides& o) {
  const ffsim::ExperimentConfig config = load_config(o);
  const auto results = ffsim::run_experiment(config);
  ffsim::emit_outputs(results, config, config.output_dir);
  int failed = 0;
  for (const auto& r : results) {
    if (!r.ok()) {
      ++failed;
      std::cerr << "run " << ffsim::to_string(r.scenario) << " N=" << r.occupancy << " rep=" << r.repetition
                << " failed: " << r.error << '\n';
    }
  }
  std::cout << "wrote " << results.size() - failed << " runs to " << config.output_dir << '\n';
  return failed == 0 ? kExitOk : kExitRuntime;
}

int cmd_analyze(const std::string& in_dir, const std::string& out_dir) {
  ffsim::analyze_directory(in_dir, out_dir.empty() ? in_dir : out_dir);
  return kExitOk;
}

int cmd_snapshot(const Overrides& o, double at) {
  const ffsim::ExperimentConfig config = load_config(o);
  std::cout << ffsim::snapshot_at(config, config.scenarios.front(), config.occupancy.front(), config.seed_base, at);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floor-field evacuation simulator with heterogeneous agents"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "simulate the scenario x occupancy x repetition grid");
  run->add_option("--config", run_opts.config_path, "key = value configuration file");
  run->add_option("--scenario", run_opts.scenario, "hom|tau|agr|obs|agr,obs|agr+obs|1-6|all");
  run->add_option("--occupancy", run_opts.occupancy, "comma-separated occupancy list");
  run->add_option("--reps", run_opts.reps, "repetitions per occupancy");
  run->add_option("--seed", run_opts.seed, "seed of the first run");
  run->add_option("--out", run_opts.out, "output directory");

  std::string in_dir;
  std::string analyze_out;
  auto* analyze = app.add_subcommand("analyze", "recompute derived tables from a run directory");
  analyze->add_option("--in", in_dir, "directory written by 'run'")->required();
  analyze->add_option("--out", analyze_out, "where to write the tables (default: --in)");

  Overrides snap_opts;
  double at = 0.0;
  auto* snapshot = app.add_subcommand("snapshot", "print the room of one run at a given time");
  snapshot->add_option("--config", snap_opts.config_path, "key = value configuration file")->required();
  snapshot->add_option("--at", at, "simulation time in seconds")->required()->check(CLI::NonNegativeNumber);
  snapshot->add_option("--scenario", snap_opts.scenario, "scenario tag");
  snapshot->add_option("--occupancy", snap_opts.occupancy, "occupancy (first value is used)");
  snapshot->add_option("--seed", snap_opts.seed, "run seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*analyze) return cmd_analyze(in_dir, analyze_out);
    if (*snapshot) return cmd_snapshot(snap_opts, at);
  } catch (const ffsim::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
