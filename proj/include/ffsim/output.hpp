#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ffsim/analysis.hpp"
#include "ffsim/config.hpp"
#include "ffsim/experiment.hpp"
#include "ffsim/measurement.hpp"
#include "ffsim/population.hpp"

namespace ffsim {

inline constexpr const char* kVersion = "0.1.0";

// One row of passages.csv.
struct PassageRow {
  ScenarioTag scenario = ScenarioTag::hom;
  int occupancy = 0;
  int repetition = 0;
  PassageRecord record;
};

// Floats are written with 9 significant digits.
inline std::string fmt9(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string fmt9(const std::optional<double>& v) {
  return v ? fmt9(*v) : std::string("NA");
}

inline constexpr std::string_view kPassagesHeader = "scenario,N,rep,agent_id,tau,gamma,k_o,t_in,t_out,tt,n_mean";

inline std::string passage_line(const PassageRow& row) {
  const PassageRecord& r = row.record;
  std::string s(to_string(row.scenario));
  s += ',' + std::to_string(row.occupancy) + ',' + std::to_string(row.repetition) + ',' + std::to_string(r.agent_id);
  for (double v : {r.params.tau, r.params.gamma, r.params.k_o, r.t_in, r.t_out, r.tt, r.n_mean}) s += ',' + fmt9(v);
  return s;
}

/// Parses passages.csv content (header included).
inline std::vector<PassageRow> parse_passages(std::istream& in) {
  std::vector<PassageRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != kPassagesHeader) {
    throw std::runtime_error("passages.csv: missing or unexpected header");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw std::runtime_error("passages.csv line " + std::to_string(line_no) + ": expected 11 fields");
    try {
      PassageRow row;
      row.scenario = parse_scenario_tag(f[0]);
      row.occupancy = std::stoi(f[1]);
      row.repetition = std::stoi(f[2]);
      PassageRecord& r = row.record;
      r.agent_id = std::stoi(f[3]);
      r.params = {std::stod(f[4]), std::stod(f[5]), std::stod(f[6])};
      r.t_in = std::stod(f[7]);
      r.t_out = std::stod(f[8]);
      r.tt = std::stod(f[9]);
      r.n_mean = std::stod(f[10]);
      rows.push_back(row);
    } catch (const std::exception& ex) {
      throw std::runtime_error("passages.csv line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return rows;
}

// Rows as they read back from passages.csv, so that derived tables computed
// right after a run match a later re-analysis bit for bit.
inline std::vector<PassageRow> rows_from_results(const std::vector<RunResult>& results) {
  std::ostringstream csv;
  csv << kPassagesHeader << '\n';
  for (const RunResult& run : results) {
    if (!run.ok()) continue;
    for (const PassageRecord& r : run.records) csv << passage_line({run.scenario, run.occupancy, run.repetition, r}) << '\n';
  }
  std::istringstream in(csv.str());
  return parse_passages(in);
}

// ---------------------------------------------------------------------------
// Derived tables

// Relative travel-time histogram bins: [0, 3) in steps of 0.25, plus overflow.
inline std::vector<double> ttr_edges() { return uniform_edges(0.0, 3.0, 0.25); }

struct Regime {
  const char* name;
  double lo;
  double hi;
};
inline constexpr Regime kFreeRegime{"free", 0.0, 7.0};
inline constexpr Regime kCongestedRegime{"congested", 30.0, 45.0};

struct DerivedTables {
  std::string summary;
  std::string quantiles;
  std::string histograms;
  std::string fits;
  std::string outflow_box;
};

namespace detail {

using RunKey = std::tuple<ScenarioTag, int, int>;

inline std::map<ScenarioTag, std::vector<const PassageRow*>> by_scenario(const std::vector<PassageRow>& rows) {
  std::map<ScenarioTag, std::vector<const PassageRow*>> out;
  for (const PassageRow& r : rows) out[r.scenario].push_back(&r);
  return out;
}

// Per-run outflow, keyed by occupancy, runs in repetition order.
inline std::map<int, std::vector<double>> outflows_by_occupancy(const std::vector<const PassageRow*>& rows) {
  std::map<std::pair<int, int>, std::vector<PassageRecord>> runs;
  for (const PassageRow* r : rows) runs[{r->occupancy, r->repetition}].push_back(r->record);
  std::map<int, std::vector<double>> out;
  for (const auto& [key, records] : runs) {
    if (auto j = run_outflow(records)) out[key.first].push_back(*j);
  }
  return out;
}

inline double mean_tt_at(const std::vector<const PassageRow*>& rows, int occupancy) {
  std::vector<double> tts;
  for (const PassageRow* r : rows) {
    if (r->occupancy == occupancy) tts.push_back(r->record.tt);
  }
  return mean_of(tts);
}

}  // namespace detail

/// Summary, quantile, histogram, fit and box-plot tables from passage rows.
inline DerivedTables derive_tables(const std::vector<PassageRow>& rows, const ExperimentConfig& config) {
  DerivedTables t;
  std::ostringstream summary, quantiles, hist, fits, box;
  summary << "scenario,v0,j_out_50,j_out_50_median,tt_45,tt_100,r2_weighted\n";
  quantiles << "# quantile method: nearest rank; records pooled over repetitions\n"
            << "scenario,N,group,count,q10,q50,q90,mean,undersized\n";
  hist << "# tt_r = tt / mean tt of records in the same n_mean bin of width " << config.ttr_bin_width << "\n"
       << "scenario,regime,bin_lo,bin_hi,fraction,records\n";
  fits << "# tt = intercept + slope * max(n_mean - breakpoint, 0), least squares per parameter group\n"
       << "scenario,group,n_records,intercept,slope,breakpoint,r2,intercept_only\n";
  box << "# quartiles by linear interpolation; outliers beyond 1.5 IQR\n"
      << "scenario,N,runs,min,q25,median,q75,max,outliers\n";

  for (const auto& [tag, rows_s] : detail::by_scenario(rows)) {
    const std::string name(to_string(tag));
    std::vector<PassageRecord> records;
    records.reserve(rows_s.size());
    for (const PassageRow* r : rows_s) records.push_back(r->record);

    // fits per parameter group
    std::map<std::string, std::vector<Observation>> obs_by_group;
    for (const PassageRecord& r : records) obs_by_group[group_label(r.params)].push_back({r.n_mean, r.tt});
    std::vector<PiecewiseFit> group_fits;
    for (auto& [label, obs] : obs_by_group) {
      if (obs.size() < 3) continue;
      PiecewiseFit f = fit_piecewise(obs, config.breakpoint);
      f.label = label;
      group_fits.push_back(f);
      fits << name << ',' << label << ',' << f.n_records << ',' << fmt9(f.intercept) << ',' << fmt9(f.slope) << ','
           << config.breakpoint << ',' << fmt9(f.r2) << ',' << (f.intercept_only ? 1 : 0) << '\n';
    }

    // summary
    const auto outflows = detail::outflows_by_occupancy(rows_s);
    double j50 = std::numeric_limits<double>::quiet_NaN();
    double j50_median = j50;
    if (auto it = outflows.find(50); it != outflows.end() && !it->second.empty()) {
      j50 = mean_of(it->second);
      std::vector<double> sorted = it->second;
      std::sort(sorted.begin(), sorted.end());
      j50_median = quantile_linear(sorted, 0.5);
    }
    summary << name << ',' << fmt9(free_flow_velocity(records)) << ',' << fmt9(j50) << ',' << fmt9(j50_median) << ','
            << fmt9(detail::mean_tt_at(rows_s, 45)) << ',' << fmt9(detail::mean_tt_at(rows_s, 100)) << ','
            << fmt9(group_fits.empty() ? std::numeric_limits<double>::quiet_NaN() : weighted_mean_r2(group_fits))
            << '\n';

    // quantile curves
    std::vector<KeyedTravelTime> keyed;
    keyed.reserve(rows_s.size());
    for (const PassageRow* r : rows_s) keyed.push_back({r->occupancy, group_label(r->record.params), r->record.tt});
    for (const QuantileRow& q : quantile_curves(keyed)) {
      quantiles << name << ',' << q.occupancy << ',' << q.group << ',' << q.count << ',' << fmt9(q.q10) << ','
                << fmt9(q.q50) << ',' << fmt9(q.q90) << ',' << fmt9(q.mean) << ',' << (q.undersized ? 1 : 0) << '\n';
    }

    // relative travel time histograms
    const auto rel = relative_travel_time(records, config.ttr_bin_width);
    const std::vector<double> edges = ttr_edges();
    for (const Regime& regime : {kFreeRegime, kCongestedRegime}) {
      std::vector<double> values;
      for (const RelativeTravelTime& r : rel) {
        const double n = records[r.record].n_mean;
        if (r.tt_r && n >= regime.lo && n <= regime.hi) values.push_back(*r.tt_r);
      }
      const Histogram h = histogram(values, edges);
      for (std::size_t i = 0; i < h.fractions.size(); ++i) {
        hist << name << ',' << regime.name << ',' << fmt9(edges[i]) << ',' << fmt9(edges[i + 1]) << ','
             << fmt9(h.fractions[i]) << ',' << h.total << '\n';
      }
      hist << name << ',' << regime.name << ',' << fmt9(edges.back()) << ",inf," << fmt9(h.overflow) << ','
           << h.total << '\n';
    }

    // outflow box plots
    for (const auto& [n, values] : outflows) {
      if (values.size() < kMinBoxplotRuns) continue;
      const BoxSummary b = boxplot_summary(values);
      box << name << ',' << n << ',' << values.size() << ',' << fmt9(b.min) << ',' << fmt9(b.q25) << ','
          << fmt9(b.median) << ',' << fmt9(b.q75) << ',' << fmt9(b.max) << ',';
      for (std::size_t i = 0; i < b.outliers.size(); ++i) box << (i ? ";" : "") << fmt9(b.outliers[i]);
      box << '\n';
    }
  }

  t.summary = summary.str();
  t.quantiles = quantiles.str();
  t.histograms = hist.str();
  t.fits = fits.str();
  t.outflow_box = box.str();
  return t;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline void write_derived(const std::filesystem::path& dir, const DerivedTables& t) {
  write_file(dir / "summary.csv", t.summary);
  write_file(dir / "quantiles.csv", t.quantiles);
  write_file(dir / "histograms.csv", t.histograms);
  write_file(dir / "fits.csv", t.fits);
  write_file(dir / "outflow_box.csv", t.outflow_box);
}

}  // namespace detail

/// Writes passages.csv, the derived tables, snapshots and manifest.txt into
/// `dir`. Throws when there is nothing to write or the directory is unusable.
inline void emit_outputs(const std::vector<RunResult>& results, const ExperimentConfig& config,
                         const std::filesystem::path& dir) {
  const bool any_ok = std::any_of(results.begin(), results.end(), [](const RunResult& r) { return r.ok(); });
  if (!any_ok) throw std::runtime_error("no successful runs, nothing to write");

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());

  const std::vector<PassageRow> rows = rows_from_results(results);
  std::ostringstream passages;
  passages << kPassagesHeader << '\n';
  for (const PassageRow& row : rows) passages << passage_line(row) << '\n';
  detail::write_file(dir / "passages.csv", passages.str());

  detail::write_derived(dir, derive_tables(rows, config));

  bool has_snapshots = false;
  for (const RunResult& run : results) {
    if (!run.ok() || !run.snapshot) continue;
    if (!has_snapshots) std::filesystem::create_directories(dir / "snapshots");
    has_snapshots = true;
    detail::write_file(dir / "snapshots" / (std::string(to_string(run.scenario)) + "_N" + std::to_string(run.occupancy) + ".txt"),
                       *run.snapshot);
  }

  std::ostringstream manifest;
  manifest << "# ffsim " << kVersion << " manifest\n" << config_to_text(config);
  for (const RunResult& run : results) {
    manifest << "# run scenario=" << to_string(run.scenario) << " N=" << run.occupancy << " rep=" << run.repetition
             << " seed=" << run.seed << " records=" << run.records.size() << " conflicts=" << run.conflicts.conflicts
             << " blocked=" << run.conflicts.blocked;
    if (!run.ok()) manifest << " error=\"" << run.error << '"';
    manifest << '\n';
  }
  detail::write_file(dir / "manifest.txt", manifest.str());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Re-derives every table from `in_dir`/passages.csv using the configuration
/// echoed in manifest.txt and writes them to `out_dir`.
inline void analyze_directory(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir) {
  const ExperimentConfig config = parse_config(read_file(in_dir / "manifest.txt"));
  std::ifstream in(in_dir / "passages.csv", std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + (in_dir / "passages.csv").string());
  const std::vector<PassageRow> rows = parse_passages(in);
  if (rows.empty()) throw std::runtime_error("passages.csv holds no records");
  std::filesystem::create_directories(out_dir);
  detail::write_derived(out_dir, derive_tables(rows, config));
}

}  // namespace ffsim
