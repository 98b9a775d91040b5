#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "gridplan/environment.hpp"
#include "gridplan/synthetic.hpp"
#include "support.hpp"

using namespace gridplan;

namespace {

// Two-bus grid: one generator, one load.
std::string day_rows(int day, int hours, double gen, double load) {
  std::ostringstream os;
  for (int h = 1; h <= hours; ++h) os << day << ',' << h << ",0," << gen << '\n' << day << ',' << h << ",1," << load << '\n';
  return os.str();
}

std::vector<DayScenario> parse(const std::string& body) {
  std::istringstream in("day,hour,injection,mw\n" + body);
  return load_day_scenarios(in, testsupport::two_bus());
}

double daily_reference_max(ScreeningCache& cache, const DayScenario& d) {
  const auto ref = TopologyConfig::reference(cache.grid());
  double m = 0.0;
  for (int h = 1; h <= kHours; ++h) m = std::max(m, cache.screen(ref, d.at(h)).max_rho);
  return m;
}

}  // namespace

TEST(LoadScenarios, ThreeWellFormedDays) {
  const auto days = parse(day_rows(3, 24, 1.0, -1.0) + day_rows(1, 24, 2.0, -2.0) + day_rows(2, 24, 1.5, -1.5));
  ASSERT_EQ(days.size(), 3u);
  EXPECT_EQ(days[0].id, 1);
  EXPECT_EQ(days[2].id, 3);
  EXPECT_EQ(days[1].at(24)[0], 1.5);
}

TEST(LoadScenarios, MissingTimestampNamesTheDay) {
  try {
    parse(day_rows(1, 24, 1.0, -1.0) + day_rows(9, 23, 1.0, -1.0));
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("day 9"), std::string::npos) << e.what();
  }
}

TEST(LoadScenarios, GeneratorSurplusIsScaledAway) {
  const auto days = parse(day_rows(1, 24, 1.1, -1.0));
  for (int h = 1; h <= kHours; ++h) {
    EXPECT_NEAR(days[0].at(h)[0], 1.0, 1e-12);
    EXPECT_LE(std::abs(days[0].at(h)[0] + days[0].at(h)[1]), 1e-9);
  }
}

TEST(LoadScenarios, MalformedInputs) {
  EXPECT_THROW(parse(day_rows(1, 24, 1.0, -1.0) + "1,1,0,2.0\n"), ValidationError);  // duplicate
  EXPECT_THROW(parse("1,1,0,abc\n"), ValidationError);
  EXPECT_THROW(parse("1,1,7,1.0\n"), ValidationError);
  EXPECT_THROW(parse("1,25,0,1.0\n"), ValidationError);
  std::istringstream bad_header("d,h,i,p\n");
  EXPECT_THROW(load_day_scenarios(bad_header, testsupport::two_bus()), ValidationError);
  std::istringstream empty("");
  EXPECT_THROW(load_day_scenarios(empty, testsupport::two_bus()), ValidationError);
}

TEST(LoadScenarios, WriteReadRoundTripIsExact) {
  const Grid g = make_desk_grid();
  const auto days = generate_synthetic_days(g, 4, desk_profile(), 12);
  std::stringstream buf;
  write_day_scenarios(buf, days);
  const auto back = load_day_scenarios(buf, g);
  ASSERT_EQ(back.size(), days.size());
  for (std::size_t d = 0; d < days.size(); ++d) {
    EXPECT_EQ(back[d].id, days[d].id);
    for (int h = 1; h <= kHours; ++h) EXPECT_EQ(back[d].at(h), days[d].at(h));
  }
}

TEST(Synthetic, SameSeedSameDays) {
  const Grid g = make_desk_grid();
  const auto a = generate_synthetic_days(g, 5, desk_profile(), 7);
  const auto b = generate_synthetic_days(g, 5, desk_profile(), 7);
  for (int d = 0; d < 5; ++d)
    for (int h = 1; h <= kHours; ++h) EXPECT_EQ(a[d].at(h), b[d].at(h));
}

TEST(Synthetic, HoursAreBalanced) {
  const Grid g = make_desk_grid();
  for (const auto& d : generate_synthetic_days(g, 5, desk_profile(), 3))
    for (int h = 1; h <= kHours; ++h) {
      double sum = 0.0, mag = 0.0;
      for (double v : d.at(h)) {
        sum += v;
        mag += std::abs(v);
      }
      EXPECT_LE(std::abs(sum), 1e-9 * mag);
    }
}

TEST(Synthetic, NoCongestionWindowsMeansReferenceSolvesEveryDay) {
  const Grid g = make_desk_grid();
  auto profile = desk_profile();
  profile.congestion_fraction = 0.0;
  ScreeningCache cache(g);
  for (const auto& d : generate_synthetic_days(g, 30, profile, 99)) EXPECT_LT(daily_reference_max(cache, d), 1.0);
}

TEST(Synthetic, DefaultProfileIsMostlyCongested) {
  const Grid g = make_desk_grid();
  ScreeningCache cache(g);
  const auto days = generate_synthetic_days(g, 50, desk_profile(), 7);
  int violated = 0;
  for (const auto& d : days) violated += daily_reference_max(cache, d) >= 1.0;
  EXPECT_GE(violated, 30);
}

TEST(Split, PaperProtocolSizes) {
  std::vector<DayScenario> days(262);
  for (int i = 0; i < 262; ++i) days[i].id = i;
  const auto s = split_dataset(days, {50, 31, 181}, 1);
  EXPECT_EQ(s.train.size(), 50u);
  EXPECT_EQ(s.in_distribution.size(), 31u);
  EXPECT_EQ(s.out_of_distribution.size(), 181u);
}

TEST(Split, DisjointAndOutOfDistributionLast) {
  std::vector<DayScenario> days(50);
  for (int i = 0; i < 50; ++i) days[i].id = 100 + i;
  const auto s = split_dataset(days, {20, 10, 20}, 7);
  std::set<int> all;
  for (const auto* v : {&s.train, &s.in_distribution, &s.out_of_distribution}) all.insert(v->begin(), v->end());
  EXPECT_EQ(all.size(), 50u);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(s.out_of_distribution[k], 130 + k);
  for (int id : s.train) EXPECT_LT(id, 130);
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
}

TEST(Split, SeedDeterminism) {
  std::vector<DayScenario> days(50);
  for (int i = 0; i < 50; ++i) days[i].id = i;
  const auto a = split_dataset(days, {20, 10, 20}, 3);
  const auto b = split_dataset(days, {20, 10, 20}, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.in_distribution, b.in_distribution);
}

TEST(Split, RejectsTooFewDays) {
  std::vector<DayScenario> days(10);
  for (int i = 0; i < 10; ++i) days[i].id = i;
  EXPECT_THROW(split_dataset(days, {5, 5, 5}, 1), ValidationError);
}
