#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ffsim/config.hpp"
#include "ffsim/dynamics.hpp"
#include "ffsim/errors.hpp"
#include "ffsim/lattice.hpp"
#include "ffsim/measurement.hpp"
#include "ffsim/population.hpp"
#include "ffsim/random.hpp"

namespace ffsim {

struct ConflictTally {
  std::int64_t conflicts = 0;
  std::int64_t blocked = 0;
  std::int64_t winner_below_max = 0;  // must stay 0
};

struct RunResult {
  ScenarioTag scenario = ScenarioTag::hom;
  int occupancy = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
  std::vector<PassageRecord> records;  // egresses after the warm-up, in egress order
  std::vector<double> egress_log;      // every egress time, warm-up included
  ConflictTally conflicts;
  std::optional<std::string> snapshot;
  std::string error;  // non-empty when the run failed

  bool ok() const { return error.empty(); }
};

// Per-step observer; receives the state after the step completed.
using StepObserver = std::function<void(const SimulationState&, const StepOutcome&)>;

/// Egress rate over the post-warm-up records: (records - 1) egresses in
/// (first t_out, last t_out]. Needs only the stored passages, so re-analysis
/// of passages.csv reproduces it.
inline std::optional<double> run_outflow(std::span<const PassageRecord> records) {
  if (records.size() < 2) return std::nullopt;
  std::vector<double> times;
  times.reserve(records.size());
  for (const PassageRecord& r : records) times.push_back(r.t_out);
  std::sort(times.begin(), times.end());
  if (!(times.back() > times.front())) return std::nullopt;
  return outflow(times, times.front(), times.back());
}

/// One simulation run. Random draws come from a single stream seeded with
/// `seed`, in the order: group memberships, start cells, start times, then
/// the step-by-step dynamics.
inline RunResult run_single(const ExperimentConfig& config, ScenarioTag tag, int occupancy, int repetition,
                            std::uint64_t seed, const StepObserver& observer = {}) {
  RunResult result;
  result.scenario = tag;
  result.occupancy = occupancy;
  result.repetition = repetition;
  result.seed = seed;

  const Room room = Room::build(config.length_cells, config.width_cells, config.exit_width_cells);
  Rng rng(seed);
  std::vector<Agent> agents = sample_population(scenario_groups(tag), occupancy, rng);
  SimulationState state = initialize_state(room, config.model, std::move(agents), rng);

  // Generous bound: far beyond any congested run of the default geometry.
  const std::int64_t max_steps = 2000LL * config.egress_target + 100000;
  while (state.egress_count < config.egress_target) {
    if (state.step >= max_steps) {
      throw SimulationError("run exceeded " + std::to_string(max_steps) + " steps without reaching the egress target");
    }
    const StepOutcome outcome = advance_step(state, room, config.model);

    for (const ConflictEvent& c : outcome.conflicts) {
      ++result.conflicts.conflicts;
      if (!c.winner) {
        ++result.conflicts.blocked;
        continue;
      }
      double top = 0.0;
      for (int id : c.contenders) top = std::max(top, state.agents[id].params.gamma);
      if (state.agents[*c.winner].params.gamma < top) ++result.conflicts.winner_below_max;
    }

    // Egress number e (1-based) is measured when e > warmup.
    std::int64_t number = state.egress_count - static_cast<std::int64_t>(outcome.egresses.size());
    for (const EgressEvent& e : outcome.egresses) {
      ++number;
      if (number > config.egress_target) break;
      if (number <= config.warmup_egress) continue;
      const Agent& a = state.agents[e.agent_id];
      PassageRecord rec;
      rec.agent_id = e.agent_id;
      rec.params = a.params;
      rec.t_in = e.t_in;
      rec.t_out = e.t_out;
      rec.tt = e.t_out - e.t_in;
      rec.n_mean = compute_nmean(state.trace, e.t_in, e.t_out);
      result.records.push_back(rec);
    }

    if (config.snapshot_at && !result.snapshot && repetition == 0 && state.now() >= *config.snapshot_at) {
      result.snapshot = render_grid(room, state);
    }
    if (observer) observer(state, outcome);
  }
  result.egress_log = std::move(state.egress_log);
  if (result.egress_log.size() > static_cast<std::size_t>(config.egress_target)) {
    result.egress_log.resize(static_cast<std::size_t>(config.egress_target));
  }
  return result;
}

/// Grid picture of a single run at the first step starting at or after
/// `seconds`.
inline std::string snapshot_at(const ExperimentConfig& config, ScenarioTag tag, int occupancy, std::uint64_t seed,
                               double seconds) {
  const Room room = Room::build(config.length_cells, config.width_cells, config.exit_width_cells);
  Rng rng(seed);
  SimulationState state =
      initialize_state(room, config.model, sample_population(scenario_groups(tag), occupancy, rng), rng);
  while (state.now() < seconds - 1e-9) advance_step(state, room, config.model);
  return render_grid(room, state);
}

// Seed of run `index` within one scenario: the same schedule is used for every
// scenario, so scenarios share random streams run by run.
inline std::uint64_t run_seed(const ExperimentConfig& config, std::size_t occupancy_index, int repetition) {
  return config.seed_base + occupancy_index * static_cast<std::uint64_t>(config.repetitions) +
         static_cast<std::uint64_t>(repetition);
}

// FFSIM_THREADS caps run-level parallelism; 0 or unset means hardware concurrency.
inline unsigned worker_count() {
  unsigned n = 0;
  if (const char* env = std::getenv("FFSIM_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs the (scenario x occupancy x repetition) grid. Results come back in
/// that nesting order whatever the thread count. A failed run carries its
/// error message and does not stop the others.
inline std::vector<RunResult> run_experiment(const ExperimentConfig& config, unsigned threads = 0) {
  validate(config);
  struct Job {
    ScenarioTag tag;
    std::size_t occ_index;
    int rep;
  };
  std::vector<Job> jobs;
  for (ScenarioTag tag : config.scenarios)
    for (std::size_t i = 0; i < config.occupancy.size(); ++i)
      for (int rep = 0; rep < config.repetitions; ++rep) jobs.push_back({tag, i, rep});

  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      const int n = config.occupancy[job.occ_index];
      const std::uint64_t seed = run_seed(config, job.occ_index, job.rep);
      try {
        results[j] = run_single(config, job.tag, n, job.rep, seed);
      } catch (const std::exception& ex) {
        results[j] = RunResult{};
        results[j].scenario = job.tag;
        results[j].occupancy = n;
        results[j].repetition = job.rep;
        results[j].seed = seed;
        results[j].error = ex.what();
      }
    }
  };

  if (threads == 0) threads = worker_count();
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  return results;
}

}  // namespace ffsim
