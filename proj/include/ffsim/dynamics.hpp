#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ffsim/errors.hpp"
#include "ffsim/lattice.hpp"
#include "ffsim/measurement.hpp"
#include "ffsim/population.hpp"
#include "ffsim/random.hpp"

namespace ffsim {

// Model constants shared by all agents of a run.
struct ModelParams {
  double k_s = 3.5;  // sensitivity to the static field
  double k_d = 0.7;  // penalization of diagonal target cells
  double mu = 0.9;   // friction among tied contenders
  double h = 0.2;    // length of one algorithm step [s]
};

// Which agent (if any) stands on each cell.
class OccupancyGrid {
 public:
  static constexpr int kEmpty = -1;

  explicit OccupancyGrid(const Room& room) : width_(room.width()), cells_(room.cell_count(), kEmpty) {}

  std::optional<int> at(Cell x) const {
    const int id = cells_[index(x)];
    if (id == kEmpty) return std::nullopt;
    return id;
  }
  bool occupied(Cell x) const { return cells_[index(x)] != kEmpty; }

  void place(Cell x, int id) {
    int& slot = cells_[index(x)];
    if (slot != kEmpty) {
      throw SimulationError("double occupancy at (" + std::to_string(x.row) + "," + std::to_string(x.col) +
                            "): agents " + std::to_string(slot) + " and " + std::to_string(id));
    }
    slot = id;
  }
  void clear(Cell x) { cells_[index(x)] = kEmpty; }

  const std::vector<int>& raw() const { return cells_; }

 private:
  std::size_t index(Cell x) const { return static_cast<std::size_t>(x.row) * width_ + x.col; }

  int width_;
  std::vector<int> cells_;
};

// ---------------------------------------------------------------------------
// Target choice

struct TargetProbability {
  Cell cell;
  double probability = 0.0;
};

/// Distribution over the neighborhood of the agent's cell (itself included):
/// weight(y) = exp(-k_s S(y)) * (1 - k_o O(y)) * (1 - k_d D(y)), normalized.
/// The agent's own cell is never treated as occupied or diagonal.
inline std::vector<TargetProbability> target_distribution(const Agent& agent, const Room& room,
                                                          const OccupancyGrid& occupancy, double k_s,
                                                          double k_d) {
  const Cell x = agent.position;
  const std::vector<Cell> hood = room.neighborhood(x);

  // Shifting S by its neighborhood minimum cancels in the normalization and
  // keeps exp() away from underflow for large k_s.
  double s_min = room.static_field(x);
  for (const Cell& y : hood) s_min = std::min(s_min, room.static_field(y));

  std::vector<TargetProbability> dist;
  dist.reserve(hood.size());
  double norm = 0.0;
  for (const Cell& y : hood) {
    double w = std::exp(-k_s * (room.static_field(y) - s_min));
    if (y != x) {
      if (occupancy.occupied(y)) w *= 1.0 - agent.params.k_o;
      if (is_diagonal(x, y)) w *= 1.0 - k_d;
    }
    dist.push_back({y, w});
    norm += w;
  }
  if (!(norm > 0.0)) throw SimulationError("target distribution has zero total weight");
  for (TargetProbability& t : dist) t.probability /= norm;
  return dist;
}

// Inverse-CDF draw; consumes exactly one uniform.
inline Cell choose_target(std::span<const TargetProbability> distribution, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (const TargetProbability& t : distribution) {
    acc += t.probability;
    if (u < acc) return t.cell;
  }
  // Rounding left u above the last partial sum: fall back to the last cell
  // with positive probability.
  for (auto it = distribution.rbegin(); it != distribution.rend(); ++it) {
    if (it->probability > 0.0) return it->cell;
  }
  return distribution.back().cell;
}

// ---------------------------------------------------------------------------
// Scheduling

// Index k of the window [k h, (k+1) h) containing t. The small offset absorbs
// rounding in sums such as 0.2 + 0.2 + 0.2.
inline std::int64_t window_index(double t, double h) {
  return static_cast<std::int64_t>(std::floor(t / h + 1e-9));
}

inline double window_start(std::int64_t k, double h) { return static_cast<double>(k) * h; }

/// Desired time of the next update after an update at `now`. A completed
/// diagonal move takes sqrt(2) times longer.
inline double schedule_next(const Agent& agent, bool move_was_diagonal, double now) {
  return now + agent.params.tau * (move_was_diagonal ? std::numbers::sqrt2 : 1.0);
}

// ---------------------------------------------------------------------------
// Conflicts

struct Conflict {
  Cell target;
  std::vector<int> contenders;  // agent ids, at least two
};

/// Winner among contenders with the given aggressiveness values, as an index
/// into `gammas`. A unique maximum wins outright. A tie at the maximum g
/// blocks everybody with probability mu (1 - g); otherwise one of the tied
/// contenders wins uniformly at random.
inline std::optional<std::size_t> resolve_by_aggressiveness(std::span<const double> gammas, double mu, Rng& rng) {
  if (gammas.empty()) return std::nullopt;
  const double top = *std::max_element(gammas.begin(), gammas.end());
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (gammas[i] == top) tied.push_back(i);
  }
  if (tied.size() == 1) return tied.front();
  if (rng.bernoulli(mu * (1.0 - top))) return std::nullopt;
  return tied[rng.index(tied.size())];
}

inline std::optional<int> resolve_conflict(const Conflict& conflict, std::span<const Agent> agents, double mu,
                                           Rng& rng) {
  std::vector<double> gammas;
  gammas.reserve(conflict.contenders.size());
  for (int id : conflict.contenders) gammas.push_back(agents[id].params.gamma);
  const auto pick = resolve_by_aggressiveness(gammas, mu, rng);
  if (!pick) return std::nullopt;
  return conflict.contenders[*pick];
}

// Resolves conflicts in the given order; result i belongs to conflicts[i].
inline std::vector<std::optional<int>> resolve_conflicts(std::span<const Conflict> conflicts,
                                                         std::span<const Agent> agents, double mu, Rng& rng) {
  std::vector<std::optional<int>> winners;
  winners.reserve(conflicts.size());
  for (const Conflict& c : conflicts) winners.push_back(resolve_conflict(c, agents, mu, rng));
  return winners;
}

// ---------------------------------------------------------------------------
// State and events

struct SimulationState {
  SimulationState(const Room& room, double h, std::vector<Agent> roster, Rng stream)
      : h(h), occupancy(room), agents(std::move(roster)), in_room(agents.size(), false), rng(stream) {}

  std::int64_t step = 0;
  double h;
  OccupancyGrid occupancy;
  std::vector<Agent> agents;  // agents[i].id == i
  std::vector<bool> in_room;
  std::deque<int> entry_queue;  // egressed agents waiting for a free entrance cell
  std::int64_t egress_count = 0;
  std::vector<double> egress_log;
  OccupancyTrace trace;
  Rng rng;

  double now() const { return window_start(step, h); }
  int agents_in_room() const { return static_cast<int>(std::count(in_room.begin(), in_room.end(), true)); }
};

struct MoveEvent {
  int agent_id = 0;
  Cell from;
  Cell to;
  bool diagonal = false;
  bool via_bond = false;
};

struct ConflictEvent {
  Cell target;
  std::vector<int> contenders;
  std::optional<int> winner;
};

struct EgressEvent {
  int agent_id = 0;
  double t_in = 0.0;
  double t_out = 0.0;
};

struct StepOutcome {
  std::int64_t step = 0;
  std::vector<int> active;
  std::vector<EgressEvent> egresses;
  std::vector<int> inserted;  // agents placed on the entrance wall this step
  std::vector<MoveEvent> moves;
  std::vector<ConflictEvent> conflicts;
};

/// Agents whose desired update time falls in the current window
/// [k h, (k+1) h), sorted by id.
inline std::vector<int> active_agents(const SimulationState& state) {
  std::vector<int> ids;
  for (const Agent& a : state.agents) {
    if (state.in_room[a.id] && window_index(a.next_activation, state.h) <= state.step) ids.push_back(a.id);
  }
  return ids;
}

// Bijection between in-room agents and occupied cells.
inline void check_invariants(const SimulationState& state, const Room& room) {
  int occupied = 0;
  for (std::size_t i = 0; i < state.occupancy.raw().size(); ++i) {
    const int id = state.occupancy.raw()[i];
    if (id == OccupancyGrid::kEmpty) continue;
    ++occupied;
    if (id < 0 || id >= int(state.agents.size()) || !state.in_room[id] ||
        room.index(state.agents[id].position) != i) {
      throw SimulationError("occupancy grid and agent positions disagree at cell " + std::to_string(i));
    }
  }
  if (occupied != state.agents_in_room()) throw SimulationError("occupied cell count differs from agents in room");
}

namespace detail {

inline void move_agent(SimulationState& state, int id, Cell to, bool via_bond, StepOutcome& outcome) {
  Agent& a = state.agents[id];
  const Cell from = a.position;
  state.occupancy.place(to, id);
  state.occupancy.clear(from);
  a.position = to;
  a.bond_target.reset();
  outcome.moves.push_back({id, from, to, is_diagonal(from, to), via_bond});
}

// Places an agent on a uniformly chosen empty entrance cell at time t.
inline std::optional<Cell> place_on_entrance(SimulationState& state, const Room& room, int id, double t) {
  std::vector<Cell> free;
  for (const Cell& c : room.entrance_cells()) {
    if (!state.occupancy.occupied(c)) free.push_back(c);
  }
  if (free.empty()) return std::nullopt;
  const Cell cell = free[state.rng.index(free.size())];
  Agent& a = state.agents[id];
  state.occupancy.place(cell, id);
  state.in_room[id] = true;
  a.position = cell;
  a.bond_target.reset();
  a.t_in = t;
  a.next_activation = std::max(t + a.params.tau, window_start(state.step + 1, state.h));
  return cell;
}

}  // namespace detail

/// Puts an agent that just left through the exit back on the entrance wall.
/// When every entrance cell is taken the agent joins the entry queue and
/// std::nullopt is returned; queued agents are inserted at the start of the
/// next step with a free entrance cell.
inline std::optional<Cell> reinsert_agent(SimulationState& state, const Room& room, int id, double now) {
  if (!state.entry_queue.empty()) {
    state.entry_queue.push_back(id);
    return std::nullopt;
  }
  auto cell = detail::place_on_entrance(state, room, id, now);
  if (!cell) state.entry_queue.push_back(id);
  return cell;
}

/// Fires bonds on cells vacated earlier in the step. Every agent bonded to a
/// vacated cell and not yet moved contends for it under the aggressiveness
/// rule; the winner moves at once and its former cell joins the queue, so a
/// single vacancy can advance a whole line. Losing contenders drop the bond.
inline std::vector<MoveEvent> apply_bonds(SimulationState& state, const ModelParams& model,
                                          std::vector<Cell> vacated, std::vector<char>& moved,
                                          StepOutcome& outcome) {
  std::map<Cell, std::vector<int>> followers;
  for (const Agent& a : state.agents) {
    if (state.in_room[a.id] && a.bond_target && !moved[a.id]) followers[*a.bond_target].push_back(a.id);
  }

  const std::size_t first_move = outcome.moves.size();
  for (std::size_t head = 0; head < vacated.size(); ++head) {
    const Cell cell = vacated[head];
    auto it = followers.find(cell);
    if (it == followers.end()) continue;
    std::vector<int> contenders = std::move(it->second);
    followers.erase(it);
    std::erase_if(contenders, [&](int id) { return moved[id] != 0; });
    if (contenders.empty() || state.occupancy.occupied(cell)) {
      for (int id : contenders) state.agents[id].bond_target.reset();
      continue;
    }

    std::optional<int> winner = contenders.front();
    if (contenders.size() > 1) {
      const Conflict conflict{cell, contenders};
      winner = resolve_conflict(conflict, state.agents, model.mu, state.rng);
      outcome.conflicts.push_back({cell, contenders, winner});
    }
    for (int id : contenders) {
      if (winner && id == *winner) continue;
      state.agents[id].bond_target.reset();
    }
    if (!winner) continue;

    const Cell from = state.agents[*winner].position;
    detail::move_agent(state, *winner, cell, true, outcome);
    moved[*winner] = 1;
    vacated.push_back(from);
  }
  return {outcome.moves.begin() + static_cast<std::ptrdiff_t>(first_move), outcome.moves.end()};
}

/// Executes algorithm step k:
///  0. queued agents enter through free entrance cells (time k h);
///  1. collect agents whose desired time lies in [k h, (k+1) h);
///  2. active agents on an exit cell leave and re-enter at the entrance wall;
///  3. other active agents drop old bonds and draw a target cell: an occupied
///     target creates a bond, the own cell is a stay, an empty cell a proposal;
///  4. proposals per empty cell are resolved by aggressiveness and friction,
///     agents bonded to a cell emptied by egress contend as well;
///  5. winners move simultaneously;
///  6. bonds fire on every vacated cell, chaining down lines;
///  7. active agents get their next desired time, at least (k+1) h;
///  8. the clock advances.
inline StepOutcome advance_step(SimulationState& state, const Room& room, const ModelParams& model) {
  StepOutcome outcome;
  outcome.step = state.step;
  const double t_step = state.now();
  const double t_next = window_start(state.step + 1, state.h);
  const std::size_t n_agents = state.agents.size();

  // 0. entry queue
  while (!state.entry_queue.empty()) {
    const int id = state.entry_queue.front();
    if (!detail::place_on_entrance(state, room, id, t_step)) break;
    state.entry_queue.pop_front();
    outcome.inserted.push_back(id);
    state.trace.record(t_step, state.agents_in_room());
  }

  // 1. active set
  outcome.active = active_agents(state);
  std::vector<char> active(n_agents, 0);
  for (int id : outcome.active) active[id] = 1;

  // 2. egress, in time order so the occupancy trace stays monotone
  std::vector<int> leaving;
  for (int id : outcome.active) {
    if (room.is_exit(state.agents[id].position)) leaving.push_back(id);
  }
  std::stable_sort(leaving.begin(), leaving.end(), [&](int a, int b) {
    return state.agents[a].next_activation < state.agents[b].next_activation;
  });
  std::vector<Cell> egress_vacated;
  std::vector<char> left(n_agents, 0);
  for (int id : leaving) {
    left[id] = 1;
    Agent& a = state.agents[id];
    const double t_out = a.next_activation;
    outcome.egresses.push_back({id, a.t_in, t_out});
    state.egress_log.push_back(t_out);
    ++state.egress_count;
    state.occupancy.clear(a.position);
    state.in_room[id] = false;
    egress_vacated.push_back(a.position);
    state.trace.record(t_out, state.agents_in_room());
    if (reinsert_agent(state, room, id, t_out)) {
      outcome.inserted.push_back(id);
      state.trace.record(t_out, state.agents_in_room());
    }
  }

  // 3. target choice
  std::vector<char> updated(n_agents, 0);  // active and still in the room
  std::map<Cell, std::vector<int>> proposals;
  for (int id : outcome.active) {
    if (left[id]) continue;
    updated[id] = 1;
    Agent& a = state.agents[id];
    a.bond_target.reset();
    const auto dist = target_distribution(a, room, state.occupancy, model.k_s, model.k_d);
    const Cell target = choose_target(dist, state.rng);
    if (target == a.position) continue;
    if (state.occupancy.occupied(target)) {
      a.bond_target = target;
    } else {
      proposals[target].push_back(id);
    }
  }
  for (const Cell& cell : egress_vacated) {
    for (const Agent& a : state.agents) {
      if (state.in_room[a.id] && !updated[a.id] && a.bond_target == cell) proposals[cell].push_back(a.id);
    }
  }

  // 4. conflicts
  std::vector<std::pair<int, Cell>> winners;
  for (auto& [cell, contenders] : proposals) {
    std::sort(contenders.begin(), contenders.end());
    std::optional<int> winner = contenders.front();
    if (contenders.size() > 1) {
      winner = resolve_conflict(Conflict{cell, contenders}, state.agents, model.mu, state.rng);
      outcome.conflicts.push_back({cell, contenders, winner});
    }
    for (int id : contenders) {
      if (!updated[id] && !(winner && *winner == id)) state.agents[id].bond_target.reset();
    }
    if (winner) winners.emplace_back(*winner, cell);
  }

  // 5. simultaneous moves into distinct empty cells
  std::vector<char> moved(n_agents, 0);
  std::vector<Cell> vacated;
  for (const auto& [id, cell] : winners) {
    vacated.push_back(state.agents[id].position);
    detail::move_agent(state, id, cell, !updated[id], outcome);
    moved[id] = 1;
  }

  // 6. bond chains
  apply_bonds(state, model, std::move(vacated), moved, outcome);

  // 7. reschedule
  std::vector<char> diagonal(n_agents, 0);
  for (const MoveEvent& m : outcome.moves) diagonal[m.agent_id] = m.diagonal;
  for (int id = 0; id < int(n_agents); ++id) {
    Agent& a = state.agents[id];
    if (updated[id]) {
      a.next_activation = std::max(schedule_next(a, diagonal[id] != 0, a.next_activation), t_next);
    } else if (moved[id] && diagonal[id]) {
      // Bonded follower moved outside its own update: charge the extra
      // diagonal time only.
      a.next_activation += a.params.tau * (std::numbers::sqrt2 - 1.0);
    }
  }

  check_invariants(state, room);
  ++state.step;
  return outcome;
}

/// Fresh run state: agents on distinct random cells of the entrance half of
/// the room (the whole room minus the exit when the half is too small) with
/// desired times uniform in [0, tau). Draw order: cells, then times.
inline SimulationState initialize_state(const Room& room, const ModelParams& model, std::vector<Agent> agents,
                                        Rng rng) {
  SimulationState state(room, model.h, std::move(agents), rng);
  const int n = static_cast<int>(state.agents.size());

  std::vector<Cell> candidates;
  for (int r = room.length() / 2; r < room.length(); ++r)
    for (int c = 0; c < room.width(); ++c) candidates.push_back({r, c});
  if (int(candidates.size()) < n) {
    candidates.clear();
    for (std::size_t i = 0; i < room.cell_count(); ++i) {
      const Cell c = room.cell_at(i);
      if (!room.is_exit(c)) candidates.push_back(c);
    }
  }
  if (int(candidates.size()) < n) {
    throw ConfigError("room of " + std::to_string(room.cell_count()) + " cells cannot hold " + std::to_string(n) +
                      " agents");
  }

  // Partial Fisher-Yates: the first n candidates become the start cells.
  for (int i = 0; i < n; ++i) {
    const std::size_t j = i + state.rng.index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  for (int i = 0; i < n; ++i) {
    Agent& a = state.agents[i];
    a.id = i;
    a.position = candidates[i];
    a.bond_target.reset();
    a.t_in = 0.0;
    state.occupancy.place(a.position, i);
    state.in_room[i] = true;
  }
  for (Agent& a : state.agents) a.next_activation = state.rng.uniform() * a.params.tau;
  state.trace.record(0.0, n);
  return state;
}

/// Text picture of the room, one character per cell: '.' empty, 'E' free
/// exit, 'o' agent with gamma below the threshold, 'A' agent at or above it.
/// Row 0 (the exit wall) is printed first.
inline std::string render_grid(const Room& room, const SimulationState& state, double aggressive_gamma = 0.5) {
  std::string out;
  for (int r = 0; r < room.length(); ++r) {
    for (int c = 0; c < room.width(); ++c) {
      const Cell x{r, c};
      if (auto id = state.occupancy.at(x)) {
        out += state.agents[*id].params.gamma >= aggressive_gamma ? 'A' : 'o';
      } else {
        out += room.is_exit(x) ? 'E' : '.';
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace ffsim
