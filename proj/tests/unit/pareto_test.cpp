#include <gtest/gtest.h>

#include <random>

#include "gridplan/pareto.hpp"
#include "gridplan/report.hpp"

using namespace gridplan;

namespace {

// Unit-strip integration over the switching axis: for every strip
// [y, y + 1) the covered width is ref - (best loading among points with
// switching <= y).
double strip_hypervolume(const std::vector<ObjectivePoint>& pts, ObjectivePoint ref) {
  double area = 0.0;
  for (int y = 0; y < ref.n_switching; ++y) {
    double best = ref.max_rho;
    for (const auto& p : pts)
      if (p.n_switching <= y) best = std::min(best, std::max(p.max_rho, 0.0));
    area += ref.max_rho - best;
  }
  return area;
}

std::vector<ObjectivePoint> random_points(std::mt19937_64& rng, int n, int denom) {
  std::vector<ObjectivePoint> v;
  for (int i = 0; i < n; ++i)
    v.push_back({static_cast<double>(rng() % (4 * denom)) / denom, static_cast<int>(rng() % 30)});
  return v;
}

}  // namespace

TEST(Filter, MutuallyNonDominatedKept) {
  const std::vector<ObjectivePoint> pts{{1, 3}, {2, 2}, {3, 1}};
  EXPECT_EQ(non_dominated_filter(pts).size(), 3u);
}

TEST(Filter, StrictDominationRemoved) {
  const auto out = non_dominated_filter({{1, 1}, {2, 2}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (ObjectivePoint{1, 1}));
}

TEST(Filter, DuplicatesCollapse) {
  const auto out = non_dominated_filter({{1, 1}, {1, 1}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (ObjectivePoint{1, 1}));
}

TEST(Filter, RandomSetsProperties) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const auto pts = random_points(rng, 1 + static_cast<int>(rng() % 20), 4);
    const auto out = non_dominated_filter(pts);
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = 0; j < out.size(); ++j)
        if (i != j) {
          EXPECT_FALSE(weakly_dominates(out[i], out[j]));
        }
    for (const auto& p : pts)
      EXPECT_TRUE(std::any_of(out.begin(), out.end(), [&](const ObjectivePoint& q) { return weakly_dominates(q, p); }));
    EXPECT_EQ(non_dominated_filter(out), out);
  }
}

TEST(Hypervolume, EmptySetIsZero) { EXPECT_EQ(hypervolume2d({}), 0.0); }

TEST(Hypervolume, WorkedExample) {
  const std::vector<ObjectivePoint> pts{{1.0, 5}, {2.0, 2}};
  EXPECT_EQ(kHypervolumeReference, (ObjectivePoint{3.1, 25}));
  EXPECT_NEAR(hypervolume2d(pts), 2.1 * 20 + 1.1 * 3, 1e-12);
  EXPECT_NEAR(hypervolume2d(pts), 45.3, 1e-12);
}

TEST(Hypervolume, PointsBeyondReferenceAddNothing) {
  const std::vector<ObjectivePoint> pts{{3.5, 0}, {1.0, 30}};
  EXPECT_EQ(hypervolume2d(pts), 0.0);
}

TEST(Hypervolume, MatchesStripOracleExactlyOnDyadicData) {
  std::mt19937_64 rng(31);
  const ObjectivePoint ref{3.125, 25};
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pts = random_points(rng, 1 + static_cast<int>(rng() % 20), 64);
    EXPECT_EQ(hypervolume2d(pts, ref), strip_hypervolume(pts, ref));
  }
}

TEST(Hypervolume, MatchesStripOracleAtDefaultReference) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pts = random_points(rng, 1 + static_cast<int>(rng() % 20), 100);
    EXPECT_NEAR(hypervolume2d(pts), strip_hypervolume(pts, kHypervolumeReference), 1e-12);
  }
}

TEST(Hypervolume, UnionNeverDecreases) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_points(rng, 5, 16);
    auto u = a;
    const auto b = random_points(rng, 5, 16);
    u.insert(u.end(), b.begin(), b.end());
    EXPECT_GE(hypervolume2d(u), hypervolume2d(a));
  }
}

TEST(DayMetricsTest, BestSolvedAndSwitching) {
  const std::vector<ObjectivePoint> plans{{0.9, 2}, {1.2, 0}};
  const auto m = day_metrics(plans);
  EXPECT_EQ(m.best_max_rho, 0.9);
  EXPECT_TRUE(m.solved);
  EXPECT_EQ(m.best_n_switching, 2);
}

TEST(DayMetricsTest, StrictThreshold) {
  const std::vector<ObjectivePoint> plans{{1.0, 0}};
  EXPECT_FALSE(day_metrics(plans).solved);
}

TEST(DayMetricsTest, EmptyRejected) { EXPECT_THROW(day_metrics({}), ValidationError); }

TEST(Aggregate, MeanSwitchingIsMeanOfDays) {
  std::vector<DayRecord> days;
  const int sw[] = {0, 1, 4, 2, 3};
  for (int d = 0; d < 5; ++d) {
    DayRecord r{"train", d, "A", {}, 1};
    r.metrics.best_n_switching = sw[d];
    r.metrics.best_max_rho = 0.5 + 0.2 * d;
    r.metrics.solved = r.metrics.best_max_rho < 1.0;
    days.push_back(r);
  }
  const auto rows = aggregate_by_split(days, {"train"}, {"A"});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].mean_n_switching, 2.0);
  EXPECT_EQ(rows[0].solved_days, 3);
  EXPECT_DOUBLE_EQ(rows[0].solved_rate, 0.6);
}

TEST(SummaryTest, InterpolatedQuartiles) {
  const auto s = summarize({4, 1, 3, 2, 5});
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.q1, 2);
  EXPECT_EQ(s.median, 3);
  EXPECT_EQ(s.q3, 4);
  EXPECT_EQ(s.max, 5);
  EXPECT_EQ(s.mean, 3);
  EXPECT_EQ(summarize({1, 2}).median, 1.5);
}
