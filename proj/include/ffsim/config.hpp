#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ffsim/dynamics.hpp"
#include "ffsim/errors.hpp"
#include "ffsim/lattice.hpp"
#include "ffsim/population.hpp"

namespace ffsim {

struct ExperimentConfig {
  int length_cells = 18;  // 7.2 m at 0.4 m per cell
  int width_cells = 11;   // 4.4 m
  int exit_width_cells = 1;
  ModelParams model;
  std::vector<ScenarioTag> scenarios = {ScenarioTag::hom};
  std::vector<int> occupancy = {1, 3, 5, 7, 10, 12, 14, 17, 20, 30, 40, 45, 50, 75, 100};
  int egress_target = 1000;
  int warmup_egress = 100;
  int repetitions = 20;
  std::uint64_t seed_base = 1;
  int ttr_bin_width = 5;
  int breakpoint = 7;
  std::string output_dir = "ffsim_out";
  std::optional<double> snapshot_at;  // seconds; dumps one grid per (scenario, N) at rep 0
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view key, std::string_view text) {
  // std::from_chars for double is missing from some toolchains still in use.
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError("key '" + std::string(key) + "': '" + s + "' is not a number");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("key '" + std::string(key) + "': '" + std::string(text) + "' is not an integer");
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// "all" expands to the six scenarios; otherwise one tag.
inline std::vector<ScenarioTag> parse_scenarios(std::string_view text) {
  if (text == "all") return {kAllScenarios.begin(), kAllScenarios.end()};
  return {parse_scenario_tag(text)};
}

inline std::vector<int> parse_occupancy_list(std::string_view text) {
  std::vector<int> values;
  for (std::string_view part : detail::split(text, ',')) values.push_back(detail::parse_int<int>("occupancy", part));
  return values;
}

/// Range checks. Model parameters follow their admissible ranges; occupancy
/// must leave the entrance wall free: 1 <= N <= cells - width.
inline void validate(const ExperimentConfig& c) {
  const Room room = Room::build(c.length_cells, c.width_cells, c.exit_width_cells);
  if (!(c.model.k_s >= 0.0)) throw ConfigError("k_s = " + detail::format_number(c.model.k_s) + " outside [0,inf)");
  if (!(c.model.k_d >= 0.0 && c.model.k_d <= 1.0))
    throw ConfigError("k_d = " + detail::format_number(c.model.k_d) + " outside [0,1]");
  if (!(c.model.mu >= 0.0 && c.model.mu <= 1.0))
    throw ConfigError("mu = " + detail::format_number(c.model.mu) + " outside [0,1]");
  if (!(c.model.h > 0.0)) throw ConfigError("h = " + detail::format_number(c.model.h) + " outside (0,inf)");
  if (c.scenarios.empty()) throw ConfigError("scenario: no scenario selected");
  if (c.occupancy.empty()) throw ConfigError("occupancy: empty list");
  const int capacity = static_cast<int>(room.cell_count()) - static_cast<int>(room.entrance_cells().size());
  for (int n : c.occupancy) {
    if (n < 1 || n > capacity) {
      throw ConfigError("occupancy = " + std::to_string(n) + " outside [1," + std::to_string(capacity) + "]");
    }
  }
  if (c.egress_target < 1) throw ConfigError("egress_target must be >= 1");
  if (c.warmup_egress < 0 || c.warmup_egress >= c.egress_target)
    throw ConfigError("warmup_egress must lie in [0, egress_target)");
  if (c.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (c.ttr_bin_width < 1) throw ConfigError("ttr_bin_width must be >= 1");
  if (c.breakpoint < 0) throw ConfigError("breakpoint must be >= 0");
  if (c.snapshot_at && !(*c.snapshot_at >= 0.0)) throw ConfigError("snapshot_at must be >= 0");
}

/// Applies one `key = value` setting.
inline void set_config_value(ExperimentConfig& c, std::string_view key, std::string_view value) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "length_cells") c.length_cells = parse_int<int>(key, value);
  else if (key == "width_cells") c.width_cells = parse_int<int>(key, value);
  else if (key == "exit_width_cells") c.exit_width_cells = parse_int<int>(key, value);
  else if (key == "k_s") c.model.k_s = parse_double(key, value);
  else if (key == "k_d") c.model.k_d = parse_double(key, value);
  else if (key == "mu") c.model.mu = parse_double(key, value);
  else if (key == "h") c.model.h = parse_double(key, value);
  else if (key == "scenario") c.scenarios = parse_scenarios(value);
  else if (key == "occupancy") c.occupancy = parse_occupancy_list(value);
  else if (key == "egress_target") c.egress_target = parse_int<int>(key, value);
  else if (key == "warmup_egress") c.warmup_egress = parse_int<int>(key, value);
  else if (key == "repetitions") c.repetitions = parse_int<int>(key, value);
  else if (key == "seed_base") c.seed_base = parse_int<std::uint64_t>(key, value);
  else if (key == "ttr_bin_width") c.ttr_bin_width = parse_int<int>(key, value);
  else if (key == "breakpoint") c.breakpoint = parse_int<int>(key, value);
  else if (key == "output_dir") c.output_dir = std::string(value);
  else if (key == "snapshot_at") c.snapshot_at = parse_double(key, value);
  else throw ConfigError("unknown key '" + std::string(key) + "'");
}

/// Parses flat `key = value` text; `#` starts a comment. Unset keys keep
/// their defaults. The result is validated.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  for (std::string_view line : detail::split(text, '\n')) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = detail::trim(line.substr(0, eq));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) throw ConfigError("duplicate key '" + std::string(key) + "'");
    set_config_value(c, key, value);
  }
  validate(c);
  return c;
}

// Canonical text form; parse_config(config_to_text(c)) reproduces c.
inline std::string config_to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "length_cells = " << c.length_cells << '\n'
      << "width_cells = " << c.width_cells << '\n'
      << "exit_width_cells = " << c.exit_width_cells << '\n'
      << "k_s = " << detail::format_number(c.model.k_s) << '\n'
      << "k_d = " << detail::format_number(c.model.k_d) << '\n'
      << "mu = " << detail::format_number(c.model.mu) << '\n'
      << "h = " << detail::format_number(c.model.h) << '\n';
  out << "scenario = ";
  if (c.scenarios.size() == kAllScenarios.size()) {
    out << "all";
  } else {
    out << to_string(c.scenarios.front());
  }
  out << '\n' << "occupancy = ";
  for (std::size_t i = 0; i < c.occupancy.size(); ++i) out << (i ? "," : "") << c.occupancy[i];
  out << '\n'
      << "egress_target = " << c.egress_target << '\n'
      << "warmup_egress = " << c.warmup_egress << '\n'
      << "repetitions = " << c.repetitions << '\n'
      << "seed_base = " << c.seed_base << '\n'
      << "ttr_bin_width = " << c.ttr_bin_width << '\n'
      << "breakpoint = " << c.breakpoint << '\n'
      << "output_dir = " << c.output_dir << '\n';
  if (c.snapshot_at) out << "snapshot_at = " << detail::format_number(*c.snapshot_at) << '\n';
  return out.str();
}

}  // namespace ffsim
