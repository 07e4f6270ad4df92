#include "aperiodic/odometer.hpp"
#include "aperiodic/tower.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

using namespace aperiodic;

namespace {

OdometerPoint pt(std::vector<std::int64_t> r) { return OdometerPoint{std::move(r)}; }

// every compatible point of a schedule
std::vector<OdometerPoint> all_points(const TowerSchedule& s) {
  std::vector<OdometerPoint> out;
  for (std::int64_t r = 0; r < s.deepest(); ++r) out.push_back(point_from_deepest(s, r));
  return out;
}

}  // namespace

TEST(Schedule, RejectsInvalid) {
  EXPECT_THROW(TowerSchedule(std::vector<std::int64_t>{}), ScheduleError);
  EXPECT_THROW(TowerSchedule({2, 3}), ScheduleError);   // no divisibility
  EXPECT_THROW(TowerSchedule({4, 4}), ScheduleError);   // not increasing
  EXPECT_THROW(TowerSchedule({0, 2}), ScheduleError);
  EXPECT_NO_THROW(TowerSchedule({2, 6, 24}));
}

TEST(Successor, Examples) {
  TowerSchedule s({2, 4});
  EXPECT_EQ(successor(pt({0, 0}), s), pt({1, 1}));
  EXPECT_EQ(successor(pt({1, 3}), s), pt({0, 0}));
  EXPECT_THROW(successor(pt({0, 1}), s), ScheduleError);
  EXPECT_THROW(successor(pt({0}), s), ScheduleError);
}

TEST(Successor, ExactPeriodFromEveryPoint) {
  TowerSchedule s({2, 4, 8});
  for (const auto& p : all_points(s)) {
    OdometerPoint q = p;
    for (int k = 1; k <= 8; ++k) {
      q = successor(q, s);
      if (k < 8)
        EXPECT_FALSE(q == p) << "returned early after " << k;
      else
        EXPECT_EQ(q, p);
    }
  }
}

TEST(Successor, BijectionWithPredecessorInverse) {
  TowerSchedule s({3, 6, 24});
  std::set<std::vector<std::int64_t>> images;
  for (const auto& p : all_points(s)) {
    auto q = successor(p, s);
    EXPECT_TRUE(is_compatible(q, s));
    EXPECT_EQ(predecessor(q, s), p);
    images.insert(q.residues);
  }
  EXPECT_EQ(images.size(), 24u);
}

TEST(Successor, ProjectionCommutes) {
  TowerSchedule s({2, 6, 18}), top({2, 6});
  for (const auto& p : all_points(s)) {
    OdometerPoint proj = pt({p.residues[0], p.residues[1]});
    auto a = successor(p, s);
    EXPECT_EQ(pt({a.residues[0], a.residues[1]}), successor(proj, top));
  }
}

TEST(CylinderMeasure, Examples) {
  EXPECT_DOUBLE_EQ(cylinder_measure(TowerSchedule({2, 4}), {2, 3}), 0.25);
  EXPECT_DOUBLE_EQ(cylinder_measure(TowerSchedule({3, 9}), {1, 1}), 1.0 / 3);
  EXPECT_EQ(cylinder_measure_exact(TowerSchedule({2, 4}), {2, 1}), Rational::make(1, 4));
  EXPECT_THROW(cylinder_measure(TowerSchedule({2, 4}), {3, 0}), ScheduleError);
}

TEST(CylinderMeasure, SuccessorInvariant) {
  TowerSchedule s({2, 6, 12});
  for (int level = 1; level <= 3; ++level)
    for (std::int64_t i = 0; i < s.period(level); ++i) {
      // preimage of the cylinder under successor, counted over the points
      int count = 0;
      for (const auto& p : all_points(s))
        if (successor(p, s).residues[static_cast<std::size_t>(level - 1)] == i) ++count;
      EXPECT_EQ(Rational::make(count, s.deepest()), cylinder_measure_exact(s, {level, i}));
    }
}

TEST(Birkhoff, FrequencyOverFullCyclesIsExact) {
  TowerSchedule s({2, 4});
  for (const auto& p : all_points(s))
    for (std::int64_t i = 0; i < 4; ++i)
      for (int k = 1; k <= 3; ++k) EXPECT_EQ(birkhoff_frequency(p, s, {2, i}, 4 * k), Rational::make(1, 4));
}

TEST(Birkhoff, Examples) {
  TowerSchedule s({2, 4});
  CylinderObservable one{1, {1.0, 1.0}};
  for (std::int64_t N : {1, 3, 7, 100}) EXPECT_DOUBLE_EQ(birkhoff_average(zero_point(s), s, one, N), 1.0);
  CylinderObservable ind{1, {1.0, 0.0}};
  EXPECT_DOUBLE_EQ(birkhoff_average(zero_point(s), s, ind, 8), 0.5);
  EXPECT_THROW(birkhoff_average(zero_point(s), s, ind, 0), std::invalid_argument);
}

TEST(Birkhoff, RandomWeightsOverOneCycle) {
  TowerSchedule s({2, 6, 24});
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  CylinderObservable obs{3, std::vector<double>(24)};
  for (auto& w : obs.weights) w = u(rng);
  long double oracle = 0;
  for (double w : obs.weights) oracle += w;
  oracle /= 24;
  for (const auto& p : all_points(s)) EXPECT_NEAR(birkhoff_average(p, s, obs, 24), static_cast<double>(oracle), 1e-15);
}

TEST(Minimality, Examples) {
  EXPECT_TRUE(minimality_check(TowerSchedule({2, 4}), 2));
  EXPECT_TRUE(minimality_check(TowerSchedule({2, 4, 12}), 3));
  EXPECT_TRUE(minimality_check(TowerSchedule({2, 4, 12}), 1));
}

TEST(Conjugacy, DepthOneTower) {
  BuildConfig cfg;
  cfg.depth = 1;
  cfg.dim = 2;
  Tower t = build_tower(cfg);
  auto s = conjugacy_from_tower(t);
  ASSERT_EQ(s.periods(), (std::vector<std::int64_t>{2}));
}

TEST(Conjugacy, DepthTwoLabelsProjectModTwo) {
  BuildConfig cfg;
  cfg.depth = 2;
  cfg.dim = 2;
  Tower t = build_tower(cfg);
  auto s = conjugacy_from_tower(t);
  ASSERT_EQ(s.periods(), (std::vector<std::int64_t>{2, 6}));
  // each repelling disk of the first stage holds three second-stage disks,
  // and D_{2,j} sits inside D_{1, j mod 2}
  std::map<std::size_t, int> per_host;
  const auto& E1 = t.stage(1).repelling.disks;
  const auto& D1 = t.stage(1).attracting.disks;
  const auto& D2 = t.stage(2).attracting.disks;
  for (std::size_t j = 0; j < D2.size(); ++j) {
    const auto& d = D2[j];
    EXPECT_LT((d.center - D1[j % 2].center).norm() + d.radius, D1[j % 2].radius);
    for (std::size_t i = 0; i < E1.size(); ++i)
      if ((d.center - E1[i].center).norm() + d.radius < E1[i].radius) ++per_host[i];
  }
  ASSERT_EQ(per_host.size(), 2u);
  EXPECT_EQ(per_host[0], 3);
  EXPECT_EQ(per_host[1], 3);
}

TEST(Conjugacy, BrokenDiskDynamicsNamesThePair) {
  BuildConfig cfg;
  cfg.depth = 1;
  cfg.dim = 2;
  Tower t = build_tower(cfg);
  t.stages[0].attracting.disks[1].radius *= 0.2;  // f(D_{1,0}) no longer fits
  try {
    conjugacy_from_tower(t);
    FAIL() << "expected a nesting violation";
  } catch (const NestingViolation& e) {
    EXPECT_EQ(e.level, 1);
    EXPECT_EQ(e.from, 0);
    EXPECT_EQ(e.to, 1);
  }
}
