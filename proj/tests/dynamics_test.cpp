#include "ffsim/dynamics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace ffsim {
namespace {

const AgentParams kHom{0.2, 0.14, 0.9};

// State with agents at the given cells, all due at `next`.
SimulationState make_state(const Room& room, const std::vector<Cell>& cells, const AgentParams& params,
                           double next = 0.0, std::uint64_t seed = 1, double h = 0.2) {
  std::vector<Agent> agents(cells.size());
  SimulationState state(room, h, std::move(agents), Rng(seed));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    Agent& a = state.agents[i];
    a.id = static_cast<int>(i);
    a.params = params;
    a.position = cells[i];
    a.next_activation = next;
    state.occupancy.place(cells[i], a.id);
    state.in_room[i] = true;
  }
  state.trace.record(0.0, static_cast<int>(cells.size()));
  return state;
}

double probability_of(const std::vector<TargetProbability>& dist, Cell c) {
  for (const auto& t : dist)
    if (t.cell == c) return t.probability;
  ADD_FAILURE() << "cell not in neighborhood";
  return -1.0;
}

// Reference values computed independently from the weight formula for an
// agent two cells in front of the exit of an empty 18 x 11 room.
TEST(TargetDistribution, MatchesReferenceValuesInEmptyRoom) {
  const Room room = Room::build(18, 11);
  const SimulationState state = make_state(room, {{2, 5}}, kHom);
  const auto dist = target_distribution(state.agents[0], room, state.occupancy, 3.5, 0.7);
  ASSERT_EQ(dist.size(), 9u);
  const std::map<Cell, double> expected = {
      {{1, 4}, 0.0587243588899481},    {{1, 5}, 0.8342848459558153},    {{1, 6}, 0.0587243588899481},
      {{2, 4}, 0.011026891427967218},  {{2, 5}, 0.02519321937675768},   {{2, 6}, 0.011026891427967218},
      {{3, 4}, 0.00012933236321691682}, {{3, 5}, 0.0007607693051625357}, {{3, 6}, 0.00012933236321691682},
  };
  double total = 0.0;
  for (const auto& t : dist) {
    EXPECT_NEAR(t.probability, expected.at(t.cell), 1e-12) << t.cell.row << "," << t.cell.col;
    total += t.probability;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto best = std::max_element(dist.begin(), dist.end(), [](auto& a, auto& b) {
    return a.probability < b.probability;
  });
  EXPECT_EQ(best->cell, (Cell{1, 5}));
}

TEST(TargetDistribution, OccupiedAndDiagonalFactors) {
  const Room room = Room::build(18, 11);
  SimulationState empty = make_state(room, {{6, 5}}, kHom);
  SimulationState crowded = make_state(room, {{6, 5}, {5, 5}}, kHom);
  const auto d0 = target_distribution(empty.agents[0], room, empty.occupancy, 3.5, 0.7);
  const auto d1 = target_distribution(crowded.agents[0], room, crowded.occupancy, 3.5, 0.7);

  // Ratios between two unoccupied cells are unchanged by the neighbor.
  EXPECT_NEAR(probability_of(d1, {6, 4}) / probability_of(d1, {6, 5}),
              probability_of(d0, {6, 4}) / probability_of(d0, {6, 5}), 1e-12);
  // The occupied front cell keeps the factor 1 - k_o relative to the stay option.
  const double ratio0 = probability_of(d0, {5, 5}) / probability_of(d0, {6, 5});
  const double ratio1 = probability_of(d1, {5, 5}) / probability_of(d1, {6, 5});
  EXPECT_NEAR(ratio1 / ratio0, 1.0 - 0.9, 1e-12);

  // Diagonal factor: compare with k_d = 0.
  const auto straight = target_distribution(empty.agents[0], room, empty.occupancy, 3.5, 0.0);
  const double diag_ratio = (probability_of(d0, {5, 4}) / probability_of(d0, {6, 5})) /
                            (probability_of(straight, {5, 4}) / probability_of(straight, {6, 5}));
  EXPECT_NEAR(diag_ratio, 0.3, 1e-12);
}

TEST(TargetDistribution, FullyAvoidingAgentNeverPicksOccupiedCell) {
  const Room room = Room::build(18, 11);
  SimulationState s = make_state(room, {{6, 5}, {5, 5}, {5, 4}}, AgentParams{0.2, 0.14, 1.0});
  const auto dist = target_distribution(s.agents[0], room, s.occupancy, 3.5, 0.7);
  EXPECT_EQ(probability_of(dist, {5, 5}), 0.0);
  EXPECT_EQ(probability_of(dist, {5, 4}), 0.0);
  EXPECT_GT(probability_of(dist, {6, 5}), 0.0);
}

TEST(TargetDistribution, LargeFieldSensitivityStaysFinite) {
  const Room room = Room::build(18, 11);
  const SimulationState s = make_state(room, {{17, 0}}, kHom);
  const auto dist = target_distribution(s.agents[0], room, s.occupancy, 500.0, 0.7);
  double total = 0.0;
  for (const auto& t : dist) {
    EXPECT_TRUE(std::isfinite(t.probability));
    total += t.probability;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ChooseTarget, UniformNeighborhoodFrequencies) {
  const Room room = Room::build(18, 11);
  const SimulationState s = make_state(room, {{6, 5}}, kHom);
  const auto dist = target_distribution(s.agents[0], room, s.occupancy, 0.0, 0.0);
  Rng rng(99);
  const int draws = 100000;
  std::map<Cell, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[choose_target(dist, rng)];
  ASSERT_EQ(counts.size(), 9u);
  const double band = 3.0 * std::sqrt((1.0 / 9.0) * (8.0 / 9.0) / draws);
  for (const auto& [cell, n] : counts) EXPECT_NEAR(n / double(draws), 1.0 / 9.0, band);
}

TEST(ChooseTarget, NeverReturnsZeroProbabilityCell) {
  const std::vector<TargetProbability> dist = {{{0, 0}, 0.0}, {{0, 1}, 1.0}, {{0, 2}, 0.0}};
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(choose_target(dist, rng), (Cell{0, 1}));
}

TEST(Scheduling, NextDesiredTimes) {
  Agent a;
  a.params = kHom;
  EXPECT_DOUBLE_EQ(schedule_next(a, false, 1.0), 1.2);
  EXPECT_NEAR(schedule_next(a, true, 1.0), 1.2828427124746190, 1e-15);
  a.params.tau = 0.4;
  EXPECT_DOUBLE_EQ(schedule_next(a, false, 2.0), 2.4);
}

TEST(Scheduling, WindowIndexAbsorbsRounding) {
  EXPECT_EQ(window_index(0.2 + 0.2 + 0.2, 0.2), 3);
  EXPECT_EQ(window_index(0.0, 0.2), 0);
  EXPECT_EQ(window_index(0.199, 0.2), 0);
  EXPECT_EQ(window_index(0.35, 0.2), 1);
}

TEST(Conflicts, UniqueMaximumAlwaysWins) {
  Rng rng(3);
  const std::vector<double> gammas = {0.14, 1.0, 0.0};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(resolve_by_aggressiveness(gammas, 0.9, rng), 1u);
}

TEST(Conflicts, FullyAggressiveTieIsNeverBlocked) {
  Rng rng(3);
  const std::vector<double> gammas = {1.0, 0.0, 1.0};
  int first = 0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    const auto w = resolve_by_aggressiveness(gammas, 0.9, rng);
    ASSERT_TRUE(w.has_value());
    ASSERT_NE(*w, 1u);
    first += *w == 0;
  }
  EXPECT_NEAR(first / double(trials), 0.5, 3.0 * std::sqrt(0.25 / trials));
}

TEST(Conflicts, HomogeneousTieBlockingFrequency) {
  Rng rng(17);
  const std::vector<double> gammas = {0.14, 0.14};
  const int trials = 100000;
  int blocked = 0;
  for (int i = 0; i < trials; ++i) blocked += !resolve_by_aggressiveness(gammas, 0.9, rng).has_value();
  const double p = 0.9 * (1.0 - 0.14);  // 0.774
  EXPECT_NEAR(blocked / double(trials), p, 3.0 * std::sqrt(p * (1 - p) / trials));
}

TEST(Conflicts, ZeroFrictionNeverBlocks) {
  Rng rng(17);
  const std::vector<double> gammas = {0.0, 0.0, 0.0};
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(resolve_by_aggressiveness(gammas, 0.0, rng).has_value());
}

TEST(Conflicts, ResolveConflictsKeepsOrder) {
  std::vector<Agent> agents(4);
  for (int i = 0; i < 4; ++i) agents[i].id = i;
  agents[1].params.gamma = 1.0;
  agents[2].params.gamma = 0.0;
  agents[3].params.gamma = 0.5;
  const std::vector<Conflict> conflicts = {{{1, 1}, {0, 1}}, {{2, 2}, {2, 3}}};
  Rng rng(1);
  const auto winners = resolve_conflicts(conflicts, agents, 0.9, rng);
  ASSERT_EQ(winners.size(), 2u);
  EXPECT_EQ(winners[0], 1);
  EXPECT_EQ(winners[1], 3);
}

// A line of agents behind the exit, all due now, with deterministic forward
// targets: the front agent steps into the exit and everybody else follows
// through bonds within the same step.
TEST(Bonds, LineAdvancesInOneStep) {
  const Room room = Room::build(8, 3);
  std::vector<Cell> cells;
  for (int r = 1; r <= 5; ++r) cells.push_back({r, 1});
  SimulationState s = make_state(room, cells, AgentParams{0.2, 0.14, 0.0});
  const ModelParams model{50.0, 1.0, 0.9, 0.2};
  const StepOutcome out = advance_step(s, room, model);
  EXPECT_EQ(out.active.size(), 5u);
  ASSERT_EQ(out.moves.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(s.agents[i].position, (Cell{i, 1}));
    EXPECT_FALSE(s.agents[i].bond_target.has_value());
    EXPECT_NEAR(s.agents[i].next_activation, 0.2, 1e-12);
  }
  EXPECT_TRUE(out.conflicts.empty());
  EXPECT_TRUE(out.egresses.empty());
}

TEST(Bonds, WaitingFollowerTakesCellVacatedByEgress) {
  const Room room = Room::build(8, 3);
  SimulationState s = make_state(room, {{0, 1}, {1, 1}}, kHom, 0.05);
  s.agents[1].next_activation = 0.3;  // not due in this step
  s.agents[1].bond_target = Cell{0, 1};
  const StepOutcome out = advance_step(s, room, ModelParams{});
  ASSERT_EQ(out.egresses.size(), 1u);
  EXPECT_EQ(out.egresses[0].agent_id, 0);
  EXPECT_DOUBLE_EQ(out.egresses[0].t_out, 0.05);
  EXPECT_EQ(s.agents[1].position, (Cell{0, 1}));
  EXPECT_DOUBLE_EQ(s.agents[1].next_activation, 0.3);
}

TEST(Bonds, DiagonalFollowerIsChargedExtraTime) {
  const Room room = Room::build(8, 3);
  SimulationState s = make_state(room, {{0, 1}, {1, 0}}, kHom, 0.05);
  s.agents[1].next_activation = 0.3;
  s.agents[1].bond_target = Cell{0, 1};
  advance_step(s, room, ModelParams{});
  EXPECT_EQ(s.agents[1].position, (Cell{0, 1}));
  EXPECT_NEAR(s.agents[1].next_activation, 0.3 + 0.2 * (std::numbers::sqrt2 - 1.0), 1e-12);
}

TEST(Egress, AgentReentersAtEntranceWall) {
  const Room room = Room::build(8, 3);
  SimulationState s = make_state(room, {{0, 1}}, kHom, 0.05);
  const StepOutcome out = advance_step(s, room, ModelParams{});
  ASSERT_EQ(out.egresses.size(), 1u);
  ASSERT_EQ(out.inserted.size(), 1u);
  const Agent& a = s.agents[0];
  EXPECT_EQ(a.position.row, 7);
  EXPECT_DOUBLE_EQ(a.t_in, 0.05);
  EXPECT_DOUBLE_EQ(a.next_activation, 0.25);
  EXPECT_EQ(s.egress_count, 1);
  EXPECT_EQ(s.agents_in_room(), 1);
  // No net change of occupancy at the egress instant.
  ASSERT_EQ(s.trace.points().size(), 1u);
  EXPECT_EQ(s.trace.at(0.1), 1);
}

TEST(Egress, FullEntranceWallQueuesTheAgent) {
  const Room room = Room::build(3, 3);
  SimulationState s = make_state(room, {{0, 1}, {2, 0}, {2, 1}, {2, 2}}, kHom, 10.0);
  s.agents[0].next_activation = 0.1;
  StepOutcome out = advance_step(s, room, ModelParams{});
  ASSERT_EQ(out.egresses.size(), 1u);
  EXPECT_TRUE(out.inserted.empty());
  ASSERT_EQ(s.entry_queue.size(), 1u);
  EXPECT_EQ(s.agents_in_room(), 3);
  EXPECT_EQ(s.trace.at(0.15), 3);

  // Free one entrance cell; the queued agent enters at the next step start.
  s.occupancy.clear({2, 2});
  s.occupancy.place({1, 2}, 3);
  s.agents[3].position = {1, 2};
  out = advance_step(s, room, ModelParams{});
  ASSERT_EQ(out.inserted, std::vector<int>{0});
  EXPECT_TRUE(s.entry_queue.empty());
  EXPECT_EQ(s.agents[0].position, (Cell{2, 2}));
  EXPECT_DOUBLE_EQ(s.agents[0].t_in, 0.2);
  EXPECT_EQ(s.trace.at(0.2), 4);
  EXPECT_NEAR(s.trace.mean_over(0.0, 0.4), (0.1 * 4 + 0.1 * 3 + 0.2 * 4) / 0.4, 1e-12);
}

TEST(Initialization, DistinctCellsInEntranceHalfAndStaggeredTimes) {
  const Room room = Room::build(18, 11);
  Rng pop_rng(8);
  auto agents = sample_population(scenario_groups(ScenarioTag::tau), 60, pop_rng);
  const SimulationState s = initialize_state(room, ModelParams{}, agents, Rng(8));
  std::set<Cell> cells;
  for (const Agent& a : s.agents) {
    EXPECT_GE(a.position.row, 9);
    EXPECT_TRUE(cells.insert(a.position).second);
    EXPECT_GE(a.next_activation, 0.0);
    EXPECT_LT(a.next_activation, a.params.tau);
    EXPECT_EQ(a.t_in, 0.0);
  }
  EXPECT_EQ(s.agents_in_room(), 60);
  EXPECT_NO_THROW(check_invariants(s, room));
}

TEST(Initialization, RejectsOverfullRoom) {
  const Room room = Room::build(3, 3);
  Rng rng(1);
  auto agents = sample_population(scenario_groups(ScenarioTag::hom), 9, rng);
  EXPECT_THROW(initialize_state(room, ModelParams{}, agents, Rng(1)), ConfigError);
}

TEST(Invariants, DetectsDisagreement) {
  const Room room = Room::build(8, 3);
  SimulationState s = make_state(room, {{3, 1}}, kHom);
  s.agents[0].position = {4, 1};
  EXPECT_THROW(check_invariants(s, room), SimulationError);
  EXPECT_THROW(s.occupancy.place({3, 1}, 0), SimulationError);
}

TEST(RenderGrid, Characters) {
  const Room room = Room::build(3, 3);
  SimulationState s = make_state(room, {{1, 0}, {2, 2}}, kHom);
  s.agents[1].params.gamma = 1.0;
  EXPECT_EQ(render_grid(room, s), ".E.\no..\n..A\n");
}

// Long heterogeneous runs: conservation, no double occupancy (checked inside
// every step), monotone egress log, neighbor-only moves, winners with maximal
// aggressiveness and desired times never behind the clock.
TEST(DynamicsProperties, ConservationAndLocality) {
  const Room room = Room::build(18, 11);
  for (ScenarioTag tag : kAllScenarios) {
    for (int n : {5, 60, 150}) {
      Rng rng(1234 + n);
      auto agents = sample_population(scenario_groups(tag), n, rng);
      SimulationState s = initialize_state(room, ModelParams{}, agents, rng);
      for (int step = 0; step < 1500; ++step) {
        const StepOutcome out = advance_step(s, room, ModelParams{});
        ASSERT_EQ(s.agents_in_room() + static_cast<int>(s.entry_queue.size()), n);
        for (const MoveEvent& m : out.moves) {
          ASSERT_LE(std::abs(m.from.row - m.to.row), 1);
          ASSERT_LE(std::abs(m.from.col - m.to.col), 1);
          ASSERT_FALSE(m.from == m.to);
        }
        for (const ConflictEvent& c : out.conflicts) {
          if (!c.winner) continue;
          double top = 0.0;
          for (int id : c.contenders) top = std::max(top, s.agents[id].params.gamma);
          ASSERT_EQ(s.agents[*c.winner].params.gamma, top);
        }
        for (const Agent& a : s.agents) {
          if (s.in_room[a.id]) { ASSERT_GE(a.next_activation + 1e-9, s.now()); }
          if (a.bond_target) { ASSERT_TRUE(s.occupancy.occupied(*a.bond_target)); }
        }
      }
      ASSERT_TRUE(std::is_sorted(s.egress_log.begin(), s.egress_log.end())) << to_string(tag) << " N=" << n;
      EXPECT_GT(s.egress_count, 0);
    }
  }
}

TEST(DynamicsProperties, SameSeedSameTrajectory) {
  const Room room = Room::build(18, 11);
  auto run = [&] {
    Rng rng(42);
    auto agents = sample_population(scenario_groups(ScenarioTag::agr_obs_dep), 40, rng);
    SimulationState s = initialize_state(room, ModelParams{}, agents, rng);
    for (int i = 0; i < 800; ++i) advance_step(s, room, ModelParams{});
    return s.egress_log;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace ffsim
