#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ffsim/lattice.hpp"
#include "ffsim/population.hpp"

namespace ffsim {

// Room length used as the path length for velocities [m].
inline constexpr double kPathLength = 7.2;

/// Number of agents in the room as a right-continuous step function of time.
///
/// Each change-point (t, n) means N(s) = n for s in [t, next change-point).
class OccupancyTrace {
 public:
  struct Point {
    double t;
    int n;
  };

  OccupancyTrace() = default;
  explicit OccupancyTrace(std::vector<Point> points) {
    for (const Point& p : points) record(p.t, p.n);
  }

  // Records that N becomes n at time t. Times must not decrease; a second
  // record at the same instant replaces the first, and no-change records are
  // dropped so change-points stay strictly increasing.
  void record(double t, int n) {
    if (n < 0) throw std::invalid_argument("occupancy must be non-negative");
    if (!points_.empty()) {
      if (t < points_.back().t) throw std::invalid_argument("occupancy trace must be recorded in time order");
      if (t == points_.back().t) {
        points_.back().n = n;
        if (points_.size() >= 2 && points_[points_.size() - 2].n == n) points_.pop_back();
        return;
      }
      if (points_.back().n == n) return;
    }
    points_.push_back({t, n});
  }

  const std::vector<Point>& points() const { return points_; }
  bool empty() const { return points_.empty(); }

  // N(t); the trace must start at or before t.
  int at(double t) const { return points_[segment_of(t)].n; }

  /// Time-weighted mean of N over [t_in, t_out], evaluated as an exact sum of
  /// segment lengths times segment values.
  double mean_over(double t_in, double t_out) const {
    if (!(t_out > t_in)) throw std::invalid_argument("occupancy window needs t_out > t_in");
    std::size_t i = segment_of(t_in);
    double integral = 0.0;
    double t = t_in;
    while (t < t_out) {
      const double seg_end = (i + 1 < points_.size()) ? std::min(points_[i + 1].t, t_out) : t_out;
      integral += (seg_end - t) * points_[i].n;
      t = seg_end;
      ++i;
    }
    return integral / (t_out - t_in);
  }

 private:
  std::size_t segment_of(double t) const {
    if (points_.empty() || t < points_.front().t) {
      throw std::invalid_argument("occupancy trace does not cover the requested time");
    }
    auto it = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double value, const Point& p) { return value < p.t; });
    return static_cast<std::size_t>(std::distance(points_.begin(), it)) - 1;
  }

  std::vector<Point> points_;
};

inline double compute_nmean(const OccupancyTrace& trace, double t_in, double t_out) {
  return trace.mean_over(t_in, t_out);
}

// One completed traversal of the room.
struct PassageRecord {
  int agent_id = 0;
  AgentParams params;
  double t_in = 0.0;
  double t_out = 0.0;
  double tt = 0.0;
  double n_mean = 0.0;
};

/// Mean of kPathLength / tt over records experienced at occupancy <= max_occupancy.
/// Empty when no record qualifies.
inline std::optional<double> free_flow_velocity(std::span<const PassageRecord> records,
                                                double max_occupancy = 4.0,
                                                double path_length = kPathLength) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const PassageRecord& r : records) {
    if (r.n_mean <= max_occupancy) {
      sum += path_length / r.tt;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

/// Egress rate over the half-open window (begin, end].
inline double outflow(std::span<const double> egress_times, double begin, double end) {
  if (!(end > begin)) throw std::invalid_argument("outflow window must have positive length");
  const auto n = std::count_if(egress_times.begin(), egress_times.end(),
                               [&](double t) { return t > begin && t <= end; });
  return static_cast<double>(n) / (end - begin);
}

struct RelativeTravelTime {
  std::size_t record = 0;          // index into the input records
  std::optional<double> tt_r;      // empty when the occupancy bin was too small
};

inline constexpr std::size_t kMinRecordsPerBin = 5;

/// Travel time divided by the mean travel time of all records whose n_mean
/// falls into the same occupancy bin [k*w, (k+1)*w).
inline std::vector<RelativeTravelTime> relative_travel_time(std::span<const PassageRecord> records,
                                                            int bin_width,
                                                            std::size_t min_count = kMinRecordsPerBin) {
  if (bin_width < 1) throw std::invalid_argument("relative travel time bin width must be >= 1");
  auto bin_of = [&](const PassageRecord& r) {
    return static_cast<long>(std::floor(r.n_mean / bin_width));
  };

  std::map<long, std::pair<double, std::size_t>> bins;
  for (const PassageRecord& r : records) {
    auto& [sum, count] = bins[bin_of(r)];
    sum += r.tt;
    ++count;
  }

  std::vector<RelativeTravelTime> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& [sum, count] = bins.at(bin_of(records[i]));
    RelativeTravelTime rel{i, std::nullopt};
    if (count >= min_count) rel.tt_r = records[i].tt / (sum / static_cast<double>(count));
    out.push_back(rel);
  }
  return out;
}

}  // namespace ffsim
