#include "ffsim/analysis.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <numeric>
#include <random>

namespace ffsim {
namespace {

TEST(PiecewiseFit, RecoversExactHinge) {
  std::vector<Observation> obs;
  for (double n = 1.0; n <= 40.0; n += 1.5) obs.push_back({n, 4.5 + 0.9 * std::max(n - 7.0, 0.0)});
  const PiecewiseFit fit = fit_piecewise(obs);
  EXPECT_NEAR(fit.intercept, 4.5, 1e-9);
  EXPECT_NEAR(fit.slope, 0.9, 1e-9);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  EXPECT_FALSE(fit.intercept_only);
  EXPECT_EQ(fit.n_records, obs.size());
}

// Reference values from an independent least-squares solve.
TEST(PiecewiseFit, SmallReferenceProblem) {
  const std::vector<Observation> obs = {{2, 5}, {6, 4}, {9, 8}, {12, 9}, {17, 15}};
  // x = max(n - 7, 0) = 0, 0, 2, 5, 10 ; y = 5, 4, 8, 9, 15
  const PiecewiseFit fit = fit_piecewise(obs);
  EXPECT_NEAR(fit.slope, 1.005617977528089, 1e-12);
  EXPECT_NEAR(fit.intercept, 4.780898876404495, 1e-12);
  EXPECT_NEAR(fit.sse, 2.7977528089887644, 1e-12);
  EXPECT_NEAR(fit.r2, 0.9625968875803641, 1e-12);
}

TEST(PiecewiseFit, InterceptOnlyWithoutRegressorSpread) {
  const std::vector<Observation> obs = {{3, 4}, {4, 5}, {5, 6}};
  const PiecewiseFit fit = fit_piecewise(obs);
  EXPECT_TRUE(fit.intercept_only);
  EXPECT_DOUBLE_EQ(fit.slope, 0.0);
  EXPECT_DOUBLE_EQ(fit.intercept, 5.0);
  EXPECT_NEAR(fit.r2, 0.0, 1e-12);
  EXPECT_THROW(fit_piecewise(std::vector<Observation>{{1, 1}, {2, 2}}), std::invalid_argument);
}

// With noisy data the slope estimate is unbiased: a t-test against the true
// slope over independent replicates does not reject at the 0.01 level.
TEST(PiecewiseFit, SlopeEstimateIsUnbiased) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> occ(1.0, 50.0);
  std::normal_distribution<double> noise(0.0, 2.0);
  std::vector<double> slopes;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Observation> obs;
    for (int i = 0; i < 100; ++i) {
      const double n = occ(gen);
      obs.push_back({n, 4.0 + 0.8 * std::max(n - 7.0, 0.0) + noise(gen)});
    }
    slopes.push_back(fit_piecewise(obs).slope);
  }
  const double m = mean_of(slopes);
  double var = 0.0;
  for (double s : slopes) var += (s - m) * (s - m);
  var /= slopes.size() - 1;
  const double t = (m - 0.8) / std::sqrt(var / slopes.size());
  const boost::math::students_t dist(slopes.size() - 1);
  EXPECT_GT(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.01);
}

TEST(WeightedR2, RecordCountWeights) {
  std::vector<PiecewiseFit> fits(2);
  fits[0].r2 = 0.9;
  fits[0].n_records = 300;
  fits[1].r2 = 0.6;
  fits[1].n_records = 100;
  EXPECT_NEAR(weighted_mean_r2(fits), 0.825, 1e-12);
  EXPECT_THROW(weighted_mean_r2(std::vector<PiecewiseFit>{}), std::invalid_argument);
}

TEST(Quantiles, NearestRankAndLinear) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(quantile_nearest_rank(v, 0.1), 10.0);
  EXPECT_EQ(quantile_nearest_rank(v, 0.5), 50.0);
  EXPECT_EQ(quantile_nearest_rank(v, 0.9), 90.0);
  EXPECT_EQ(quantile_nearest_rank(v, 0.0), 1.0);
  EXPECT_EQ(quantile_nearest_rank(v, 1.0), 100.0);
  EXPECT_DOUBLE_EQ(quantile_linear(v, 0.5), 50.5);
  EXPECT_THROW(quantile_nearest_rank(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST(Quantiles, CurvesPerLevelAndGroup) {
  std::vector<KeyedTravelTime> records;
  for (int i = 1; i <= 20; ++i) records.push_back({5, i % 2 ? "a" : "b", double(i)});
  for (int i = 1; i <= 4; ++i) records.push_back({10, "a", 10.0 * i});
  const auto rows = quantile_curves(records);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0].group, "all");
  EXPECT_EQ(rows[0].occupancy, 5);
  EXPECT_EQ(rows[0].count, 20u);
  EXPECT_EQ(rows[0].q10, 2.0);
  EXPECT_EQ(rows[0].q50, 10.0);
  EXPECT_EQ(rows[0].q90, 18.0);
  EXPECT_DOUBLE_EQ(rows[0].mean, 10.5);
  EXPECT_EQ(rows[1].group, "a");
  EXPECT_EQ(rows[1].q50, 9.0);
  EXPECT_EQ(rows[2].group, "b");
  EXPECT_EQ(rows[3].group, "all");
  EXPECT_TRUE(rows[3].undersized);
  // q10 <= q50 <= q90 throughout
  for (const auto& r : rows) {
    EXPECT_LE(r.q10, r.q50);
    EXPECT_LE(r.q50, r.q90);
  }
}

TEST(Histogram, FractionsSumToOne) {
  const std::vector<double> values = {-1.0, 0.1, 0.3, 0.3, 0.6, 2.9, 3.0, 7.0};
  const auto edges = uniform_edges(0.0, 3.0, 0.25);
  ASSERT_EQ(edges.size(), 13u);
  const Histogram h = histogram(values, edges);
  EXPECT_DOUBLE_EQ(h.underflow, 1.0 / 8);
  EXPECT_DOUBLE_EQ(h.overflow, 2.0 / 8);
  EXPECT_DOUBLE_EQ(h.fractions[0], 1.0 / 8);
  EXPECT_DOUBLE_EQ(h.fractions[1], 2.0 / 8);
  EXPECT_DOUBLE_EQ(h.fractions[2], 1.0 / 8);
  EXPECT_DOUBLE_EQ(h.fractions[11], 1.0 / 8);
  double total = h.underflow + h.overflow;
  for (double f : h.fractions) total += f;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW(histogram(values, std::vector<double>{1.0, 1.0}), std::invalid_argument);
}

TEST(BoxPlot, QuartilesAndOutliers) {
  std::vector<double> v(20);
  std::iota(v.begin(), v.end(), 1.0);
  BoxSummary b = boxplot_summary(v);
  EXPECT_DOUBLE_EQ(b.q25, 5.75);
  EXPECT_DOUBLE_EQ(b.median, 10.5);
  EXPECT_DOUBLE_EQ(b.q75, 15.25);
  EXPECT_TRUE(b.outliers.empty());
  EXPECT_DOUBLE_EQ(b.min, 1.0);
  EXPECT_DOUBLE_EQ(b.max, 20.0);

  v.push_back(100.0);
  b = boxplot_summary(v);
  ASSERT_EQ(b.outliers.size(), 1u);
  EXPECT_DOUBLE_EQ(b.outliers[0], 100.0);
  EXPECT_DOUBLE_EQ(b.max, 20.0);
  EXPECT_THROW(boxplot_summary(std::vector<double>{1, 2, 3, 4}), std::invalid_argument);
}

}  // namespace
}  // namespace ffsim
