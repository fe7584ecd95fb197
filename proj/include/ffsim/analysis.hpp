#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffsim {

inline constexpr double kDefaultBreakpoint = 7.0;

// ---------------------------------------------------------------------------
// Hinge regression  tt = intercept + slope * max(n - breakpoint, 0)

struct Observation {
  double n_mean = 0.0;
  double tt = 0.0;
};

struct PiecewiseFit {
  std::string label;  // whose records were fitted (agent or parameter group)
  double intercept = 0.0;
  double slope = 0.0;
  double breakpoint = kDefaultBreakpoint;
  double r2 = 0.0;
  double sse = 0.0;
  std::size_t n_records = 0;
  bool intercept_only = false;  // no spread in the hinge regressor
};

/// Least-squares fit of the hinge model via the 2x2 normal equations.
/// When the regressor max(n - breakpoint, 0) has no spread (all records on
/// one side, or identical occupancy) the slope is fixed to 0 and the fit is
/// flagged intercept-only.
inline PiecewiseFit fit_piecewise(std::span<const Observation> obs, double breakpoint = kDefaultBreakpoint) {
  if (obs.size() < 3) throw std::invalid_argument("piecewise fit needs at least 3 records");
  const double n = static_cast<double>(obs.size());

  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const Observation& o : obs) {
    mean_x += std::max(o.n_mean - breakpoint, 0.0);
    mean_y += o.tt;
  }
  mean_x /= n;
  mean_y /= n;

  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const Observation& o : obs) {
    const double dx = std::max(o.n_mean - breakpoint, 0.0) - mean_x;
    const double dy = o.tt - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }

  PiecewiseFit fit;
  fit.breakpoint = breakpoint;
  fit.n_records = obs.size();
  // Relative threshold: sxx is a sum of squared deviations of the regressor.
  if (sxx <= 1e-12 * std::max(1.0, mean_x * mean_x) * n) {
    fit.intercept_only = true;
    fit.slope = 0.0;
    fit.intercept = mean_y;
  } else {
    fit.slope = sxy / sxx;
    fit.intercept = mean_y - fit.slope * mean_x;
  }

  double sse = 0.0;
  for (const Observation& o : obs) {
    const double r = o.tt - (fit.intercept + fit.slope * std::max(o.n_mean - breakpoint, 0.0));
    sse += r * r;
  }
  fit.sse = sse;
  if (syy > 0.0) {
    fit.r2 = 1.0 - sse / syy;
  } else {
    fit.r2 = sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  }
  return fit;
}

// Record-count weighted mean of the fits' R^2.
inline double weighted_mean_r2(std::span<const PiecewiseFit> fits) {
  if (fits.empty()) throw std::invalid_argument("weighted mean R^2 of no fits");
  double num = 0.0;
  double den = 0.0;
  for (const PiecewiseFit& f : fits) {
    num += static_cast<double>(f.n_records) * f.r2;
    den += static_cast<double>(f.n_records);
  }
  if (den == 0.0) throw std::invalid_argument("weighted mean R^2 with zero total weight");
  return num / den;
}

// ---------------------------------------------------------------------------
// Quantiles

// Nearest-rank quantile of sorted data: the ceil(q n)-th smallest value.
inline double quantile_nearest_rank(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double n = static_cast<double>(sorted.size());
  // The epsilon stops 0.1 * 100 = 10.000000000000002 from rounding up a rank.
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

// Linear interpolation between order statistics at position (n - 1) q.
inline double quantile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double mean_of(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

struct QuantileRow {
  int occupancy = 0;
  std::string group;  // "all" or a parameter group label
  std::size_t count = 0;
  double q10 = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double mean = 0.0;
  bool undersized = false;
};

inline constexpr std::size_t kMinQuantileGroup = 10;

struct KeyedTravelTime {
  int occupancy = 0;
  std::string group;
  double tt = 0.0;
};

/// Per occupancy level: nearest-rank 0.1/0.5/0.9 quantiles and mean of TT
/// over all records ("all"), then the same for each parameter group.
/// Rows are ordered by occupancy, with "all" first and groups by label.
inline std::vector<QuantileRow> quantile_curves(std::span<const KeyedTravelTime> records,
                                                std::size_t min_group = kMinQuantileGroup) {
  std::map<int, std::map<std::string, std::vector<double>>> by_level;
  for (const KeyedTravelTime& r : records) {
    by_level[r.occupancy]["all"].push_back(r.tt);
    by_level[r.occupancy]["group:" + r.group].push_back(r.tt);
  }

  std::vector<QuantileRow> rows;
  for (auto& [level, groups] : by_level) {
    auto emit = [&](const std::string& name, std::vector<double>& tts) {
      std::sort(tts.begin(), tts.end());
      QuantileRow row;
      row.occupancy = level;
      row.group = name;
      row.count = tts.size();
      row.q10 = quantile_nearest_rank(tts, 0.1);
      row.q50 = quantile_nearest_rank(tts, 0.5);
      row.q90 = quantile_nearest_rank(tts, 0.9);
      row.mean = mean_of(tts);
      row.undersized = tts.size() < min_group;
      rows.push_back(row);
    };
    emit("all", groups.at("all"));
    for (auto& [key, tts] : groups) {
      if (key != "all") emit(key.substr(6), tts);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Histograms and box plots

struct Histogram {
  std::vector<double> edges;
  std::vector<double> fractions;  // one per [edges[i], edges[i+1])
  double underflow = 0.0;         // below edges.front()
  double overflow = 0.0;          // at or above edges.back()
  std::size_t total = 0;
};

/// Fractions of values per bin, including the two overflow bins, so that all
/// fractions sum to one. An empty input gives all-zero fractions.
inline Histogram histogram(std::span<const double> values, std::span<const double> edges) {
  if (edges.size() < 2) throw std::invalid_argument("histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("histogram edges must be strictly increasing");
  }
  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  h.fractions.assign(edges.size() - 1, 0.0);
  std::vector<std::size_t> counts(edges.size() - 1, 0);
  std::size_t under = 0;
  std::size_t over = 0;
  for (double v : values) {
    if (v < edges.front()) {
      ++under;
    } else if (v >= edges.back()) {
      ++over;
    } else {
      const auto it = std::upper_bound(edges.begin(), edges.end(), v);
      ++counts[static_cast<std::size_t>(it - edges.begin()) - 1];
    }
  }
  h.total = values.size();
  if (h.total == 0) return h;
  const double n = static_cast<double>(h.total);
  for (std::size_t i = 0; i < counts.size(); ++i) h.fractions[i] = static_cast<double>(counts[i]) / n;
  h.underflow = static_cast<double>(under) / n;
  h.overflow = static_cast<double>(over) / n;
  return h;
}

// Evenly spaced edges lo, lo + width, ..., up to hi.
inline std::vector<double> uniform_edges(double lo, double hi, double width) {
  std::vector<double> edges;
  const auto n = static_cast<long>(std::llround((hi - lo) / width));
  for (long i = 0; i <= n; ++i) edges.push_back(lo + static_cast<double>(i) * width);
  return edges;
}

struct BoxSummary {
  double min = 0.0;  // lowest value inside the whiskers
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;  // highest value inside the whiskers
  std::vector<double> outliers;
};

inline constexpr std::size_t kMinBoxplotRuns = 5;

/// Linear-interpolation quartiles; values beyond 1.5 IQR from the box are
/// outliers and the whiskers end at the most extreme remaining values.
inline BoxSummary boxplot_summary(std::span<const double> values) {
  if (values.size() < kMinBoxplotRuns) {
    throw std::invalid_argument("box plot needs at least " + std::to_string(kMinBoxplotRuns) + " values");
  }
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxSummary b;
  b.q25 = quantile_linear(v, 0.25);
  b.median = quantile_linear(v, 0.5);
  b.q75 = quantile_linear(v, 0.75);
  const double iqr = b.q75 - b.q25;
  const double lo_fence = b.q25 - 1.5 * iqr;
  const double hi_fence = b.q75 + 1.5 * iqr;
  b.min = std::numeric_limits<double>::infinity();
  b.max = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    if (x < lo_fence || x > hi_fence) {
      b.outliers.push_back(x);
    } else {
      b.min = std::min(b.min, x);
      b.max = std::max(b.max, x);
    }
  }
  return b;
}

}  // namespace ffsim
