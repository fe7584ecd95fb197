#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ffsim/errors.hpp"
#include "ffsim/lattice.hpp"
#include "ffsim/random.hpp"

namespace ffsim {

// Individual properties carried by an agent for its whole life.
struct AgentParams {
  double tau = 0.2;    // own period [s]
  double gamma = 0.14; // aggressiveness, wins conflicts against lower values
  double k_o = 0.9;    // sensitivity to occupied target cells

  friend bool operator==(const AgentParams&, const AgentParams&) = default;
};

inline void validate(const AgentParams& p) {
  if (!(p.tau > 0.0)) throw ConfigError("agent period tau must be > 0");
  if (!(p.gamma >= 0.0 && p.gamma <= 1.0)) throw ConfigError("agent gamma must lie in [0,1]");
  if (!(p.k_o >= 0.0 && p.k_o <= 1.0)) throw ConfigError("agent k_o must lie in [0,1]");
}

struct Agent {
  int id = 0;
  AgentParams params;
  Cell position;
  double next_activation = 0.0;
  // Cell whose occupant this agent waits for. Always an occupied neighbor.
  std::optional<Cell> bond_target;
  double t_in = 0.0;
};

enum class ScenarioTag { hom, tau, agr, obs, agr_obs_indep, agr_obs_dep };

inline constexpr std::array<ScenarioTag, 6> kAllScenarios = {
    ScenarioTag::hom, ScenarioTag::tau,           ScenarioTag::agr,
    ScenarioTag::obs, ScenarioTag::agr_obs_indep, ScenarioTag::agr_obs_dep};

// Identifier used in file names and CSV columns.
inline std::string_view to_string(ScenarioTag tag) {
  switch (tag) {
    case ScenarioTag::hom: return "hom";
    case ScenarioTag::tau: return "tau";
    case ScenarioTag::agr: return "agr";
    case ScenarioTag::obs: return "obs";
    case ScenarioTag::agr_obs_indep: return "agr_obs_indep";
    case ScenarioTag::agr_obs_dep: return "agr_obs_dep";
  }
  return "?";
}

// Accepts the canonical identifiers, the short forms "agr,obs" and
// "agr+obs", and the numeric aliases 1-6.
inline ScenarioTag parse_scenario_tag(std::string_view text) {
  if (text == "hom" || text == "1") return ScenarioTag::hom;
  if (text == "tau" || text == "2") return ScenarioTag::tau;
  if (text == "agr" || text == "3") return ScenarioTag::agr;
  if (text == "obs" || text == "4") return ScenarioTag::obs;
  if (text == "agr,obs" || text == "agr_obs_indep" || text == "5") return ScenarioTag::agr_obs_indep;
  if (text == "agr+obs" || text == "agr_obs_dep" || text == "6") return ScenarioTag::agr_obs_dep;
  throw ConfigError("unknown scenario '" + std::string(text) +
                    "' (expected hom|tau|agr|obs|agr,obs|agr+obs or 1-6)");
}

struct ParamGroup {
  AgentParams params;
  double probability = 1.0;
};

struct Scenario {
  ScenarioTag tag = ScenarioTag::hom;
  std::vector<ParamGroup> groups;
};

// Homogeneous reference values and the two-level heterogeneous alternatives.
inline constexpr double kHomTau = 0.2;
inline constexpr double kHomGamma = 0.14;
inline constexpr double kHomKo = 0.9;
inline constexpr std::array<double, 2> kHetTau = {0.15, 0.4};
inline constexpr std::array<double, 2> kHetGamma = {0.0, 1.0};
inline constexpr std::array<double, 2> kHetKo = {0.1, 0.95};

inline Scenario scenario_groups(ScenarioTag tag) {
  Scenario s{tag, {}};
  switch (tag) {
    case ScenarioTag::hom:
      s.groups = {{{kHomTau, kHomGamma, kHomKo}, 1.0}};
      break;
    case ScenarioTag::tau:
      for (double tau : kHetTau) s.groups.push_back({{tau, kHomGamma, kHomKo}, 0.5});
      break;
    case ScenarioTag::agr:
      for (double g : kHetGamma) s.groups.push_back({{kHomTau, g, kHomKo}, 0.5});
      break;
    case ScenarioTag::obs:
      for (double k : kHetKo) s.groups.push_back({{kHomTau, kHomGamma, k}, 0.5});
      break;
    case ScenarioTag::agr_obs_indep:
      for (double g : kHetGamma)
        for (double k : kHetKo) s.groups.push_back({{kHomTau, g, k}, 0.25});
      break;
    case ScenarioTag::agr_obs_dep:
      // The aggressive group is also the one unwilling to queue.
      s.groups = {{{kHomTau, kHetGamma[1], kHetKo[1]}, 0.5}, {{kHomTau, kHetGamma[0], kHetKo[0]}, 0.5}};
      break;
  }
  return s;
}

/// Draws n agents with independent group memberships. Positions and
/// activation times are left for the caller to assign.
inline std::vector<Agent> sample_population(const Scenario& scenario, int n, Rng& rng) {
  if (n < 1) throw ConfigError("population size must be >= 1, got " + std::to_string(n));
  if (scenario.groups.empty()) throw ConfigError("scenario has no parameter groups");

  std::vector<Agent> agents(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    const ParamGroup* chosen = &scenario.groups.back();
    for (const ParamGroup& g : scenario.groups) {
      acc += g.probability;
      if (u < acc) {
        chosen = &g;
        break;
      }
    }
    agents[i].id = i;
    agents[i].params = chosen->params;
  }
  return agents;
}

// Short human-readable label for a parameter group, e.g. "tau=0.2;gamma=1;k_o=0.95".
inline std::string group_label(const AgentParams& p) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  return "tau=" + fmt(p.tau) + ";gamma=" + fmt(p.gamma) + ";k_o=" + fmt(p.k_o);
}

}  // namespace ffsim
