#include "aperiodic/cocycle.hpp"
#include "aperiodic/model_maps.hpp"
#include "aperiodic/tower.hpp"
#include "aperiodic/verifier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace aperiodic;

namespace {

const Tower& default3() {
  static const Tower t = build_tower(BuildConfig{});
  return t;
}

const Tower& default2() {
  static const Tower t = [] {
    BuildConfig c;
    c.dim = 2;
    return build_tower(c);
  }();
  return t;
}

bool inside(const Vecd& p, const Disk& d) { return (p - d.center).norm() < d.radius; }

// product exponents straight from the singular values of the full product,
// used to cross-check the stored spectrum
std::vector<double> brute_exponents(const Cocycled& c) {
  Matd p = Matd::Identity(c.dim(), c.dim());
  for (std::int64_t i = 0; i < c.period(); ++i) p = c.at(i) * p;
  Eigen::JacobiSVD<Matd> svd(p);
  std::vector<double> out;
  for (int k = 0; k < c.dim(); ++k) out.push_back(std::log(svd.singularValues()(k)) / double(c.period()));
  return out;
}

}  // namespace

TEST(SeedStage, TwoDisksWithSaddleCertificate) {
  Tower t = seed_stage(make_model_3d(false), 2, 0.2);
  ASSERT_EQ(t.depth(), 1);
  const auto& s = t.stage(1);
  EXPECT_EQ(s.attracting.disks.size(), 2u);
  EXPECT_EQ(s.repelling.disks.size(), 2u);
  EXPECT_EQ(s.cert.period, 2);
  EXPECT_LT(max_diameter(s), 0.2);
  auto b = brute_exponents(s.cert.cocycle);
  EXPECT_NEAR(b[0], 3.2, 1e-12);
  EXPECT_NEAR(b[1], -1.6, 1e-12);
  EXPECT_NEAR(b[2], -1.6, 1e-12);
  ASSERT_EQ(s.cert.spectrum.values.size(), 3u);
  EXPECT_NEAR(s.cert.spectrum.chi_plus(), 3.2, 1e-12);
  EXPECT_NEAR(s.cert.spectrum.chi_minus(), -1.6, 1e-12);
}

TEST(SeedStage, Rejections) {
  EXPECT_THROW(seed_stage(make_model_3d(false), 1, 0.2), TowerError);
  try {
    seed_stage(make_model_3d(false), 2, 1e-12);
    FAIL() << "tiny delta accepted";
  } catch (const TowerError& e) {
    EXPECT_NE(std::string(e.what()).find("feasible"), std::string::npos) << e.what();
  }
}

TEST(Refine, TripleBranchGivesPeriodSix) {
  Tower t = refine(seed_stage(make_model_3d(false), 2, 0.2), 3, 0.05, 1);
  ASSERT_EQ(t.depth(), 2);
  EXPECT_EQ(t.stage(2).period, 6);
  EXPECT_LT(max_diameter(t.stage(2)), 0.05);
  EXPECT_EQ(conjugacy_from_tower(t).periods(), (std::vector<std::int64_t>{2, 6}));
}

TEST(Refine, CertificateExponentsDoNotDependOnLevel) {
  BuildConfig c;
  c.depth = 4;
  Tower t = build_tower(c);
  for (const auto& s : t.stages) {
    auto b = brute_exponents(s.cert.cocycle);
    EXPECT_NEAR(b[0], 3.2, 1e-9) << "level " << s.level;
    EXPECT_NEAR(b[1], -1.6, 1e-9) << "level " << s.level;
    EXPECT_NEAR(b[2], -1.6, 1e-9) << "level " << s.level;
  }
}

TEST(Refine, Rejections) {
  Tower seed = seed_stage(make_model_3d(false), 2, 0.2);
  EXPECT_THROW(refine(seed, 1, 0.05, 1), TowerError);
  try {
    refine(seed, 3, 0.05, 100);
    FAIL() << "period below m0 accepted";
  } catch (const TowerError& e) {
    EXPECT_NE(std::string(e.what()).find("m0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(refine(seed, 3, 1e-15, 1), TowerError);
}

TEST(RefinePair, EightLeavesPairwiseDisjoint) {
  Tower seed = seed_stage(make_model_3d(false), 2, 0.2);
  auto leaves = branch_forest(seed, 3, 3, 0.5);
  ASSERT_EQ(leaves.size(), 8u);
  for (std::size_t a = 0; a < leaves.size(); ++a) {
    EXPECT_EQ(leaves[a].word.size(), 3u);
    for (std::size_t b = a + 1; b < leaves.size(); ++b)
      EXPECT_GT(class_separation(leaves[a], leaves[b]), 0) << leaves[a].word << " vs " << leaves[b].word;
  }
}

TEST(RefinePair, ChildrenShareTheParentStages) {
  Tower seed = refine(seed_stage(make_model_3d(false), 2, 0.2), 3, 0.05, 1);
  auto [a, b] = refine_pair(seed, 3, 0.01, 1);
  ASSERT_EQ(a.depth(), 3);
  ASSERT_EQ(b.depth(), 3);
  for (int n = 1; n <= 2; ++n)
    for (std::size_t i = 0; i < a.stage(n).centers.size(); ++i) {
      EXPECT_EQ(a.stage(n).centers[i], b.stage(n).centers[i]);
      EXPECT_EQ(a.stage(n).attracting.disks[i].radius, b.stage(n).attracting.disks[i].radius);
    }
  EXPECT_EQ(a.word, "0");
  EXPECT_EQ(b.word, "1");
}

TEST(RefinePair, FirstLetterDecidesStageTwo) {
  Tower seed = seed_stage(make_model_3d(false), 2, 0.2);
  auto leaves = branch_forest(seed, 2, 3, 0.5);
  ASSERT_EQ(leaves.size(), 4u);
  for (const auto& x : leaves)
    for (const auto& y : leaves) {
      if (x.word[0] == y.word[0]) continue;
      for (const auto& dx : x.stage(2).attracting.disks)
        for (const auto& dy : y.stage(2).attracting.disks)
          EXPECT_GT((dx.center - dy.center).norm() - dx.radius - dy.radius, 0);
    }
}

TEST(RefinePair, PackingFailureNamesTheBound) {
  BuildConfig c;
  c.dim = 2;
  c.depth = 5;
  Tower t = build_tower(c);
  try {
    refine_pair(t, 3, 1e-12, 1);
    FAIL() << "two families fitted below the support floor";
  } catch (const TowerError& e) {
    EXPECT_NE(std::string(e.what()).find("packing"), std::string::npos) << e.what();
  }
}

TEST(RealizedMap, OuterPartOfFirstDiskLandsInTheNext) {
  const Tower& t = default3();
  RealizedMap f(t);
  const auto& D = t.stage(1).attracting.disks;
  const auto& E = t.stage(1).repelling.disks;
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  int tested = 0;
  for (int k = 0; k < 400; ++k) {
    Vecd dir(3);
    for (int a = 0; a < 3; ++a) dir(a) = g(rng);
    dir.normalize();
    double r = D[0].radius * std::uniform_real_distribution<double>(0.5, 0.999)(rng);
    Vecd x = D[0].center + r * dir;
    bool in_R = false;
    for (const auto& e : E) in_R = in_R || inside(x, e);
    if (in_R) continue;
    ++tested;
    EXPECT_TRUE(inside(f.eval(x), D[1]));
  }
  EXPECT_GT(tested, 100);
}

TEST(RealizedMap, CertificateOrbitAndDerivative) {
  for (const Tower* tp : {&default3(), &default2()}) {
    const Tower& t = *tp;
    RealizedMap f(t);
    for (const auto& s : t.stages) {
      for (std::int64_t j = 0; j < s.period; ++j) {
        const auto& c = s.centers[static_cast<std::size_t>(j)];
        const auto& next = s.centers[static_cast<std::size_t>((j + 1) % s.period)];
        EXPECT_LT((f.eval(c) - next).norm(), 1e-12 * s.support + 1e-15);
        EXPECT_LT((f.deriv(c) - s.cert.cocycle.at(j)).norm(), 1e-12);
      }
      EXPECT_EQ(s.cert.location, s.centers.front());
    }
  }
}

TEST(RealizedMap, ReturnMapKeepsDeepestDisks) {
  const Tower& t = default3();
  RealizedMap f(t);
  const auto& deep = t.stages.back();
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::int64_t> pick(0, deep.period - 1);
  for (int k = 0; k < 40; ++k) {
    auto i = static_cast<std::size_t>(pick(rng));
    const Disk& d = deep.attracting.disks[i];
    Vecd dir(3);
    for (int a = 0; a < 3; ++a) dir(a) = g(rng);
    dir.normalize();
    Vecd x = d.center + 0.95 * d.radius * dir;
    for (std::int64_t n = 0; n < deep.period; ++n) x = f.eval(x);
    EXPECT_TRUE(inside(x, d)) << "disk " << i;
  }
}

TEST(RealizedMap, DomainInverseAndDerivative) {
  for (const Tower* tp : {&default3(), &default2()}) {
    const Tower& t = *tp;
    const int d = t.dim;
    RealizedMap f(t);
    EXPECT_THROW(f.eval(Vecd::Zero(d)), DomainError);
    EXPECT_THROW(f.inverse(Vecd::Constant(d, 5.0)), DomainError);
    std::mt19937 rng(3);
    std::normal_distribution<double> g;
    const auto& s1 = t.stage(1);
    for (int k = 0; k < 300; ++k) {
      auto i = static_cast<std::size_t>(k % s1.period);
      Vecd dir(d);
      for (int a = 0; a < d; ++a) dir(a) = g(rng);
      dir.normalize();
      // spread radii over every layer of the local picture
      double rho = std::pow(10.0, std::uniform_real_distribution<double>(-3.0, -0.01)(rng));
      Vecd x = s1.centers[i] + s1.support * rho * dir;
      Vecd y = f.eval(x);
      EXPECT_LT((f.inverse(y) - x).norm(), 1e-9 * s1.support);
      Matd J = f.deriv(x);
      const double h = 1e-7 * s1.support * rho;
      Matd fd(d, d);
      for (int a = 0; a < d; ++a) {
        Vecd e = Vecd::Zero(d);
        e(a) = h;
        fd.col(a) = (f.eval(x + e) - f.eval(x - e)) / (2 * h);
      }
      EXPECT_LT((fd - J).norm(), 1e-4 * (1 + J.norm())) << "rho " << rho;
    }
  }
}

TEST(LimitSet, SampleCapAndNesting) {
  const Tower& t = default3();
  bool capped = false;
  auto few = limit_set_sample(t, 5, &capped);
  EXPECT_EQ(few.size(), 5u);
  EXPECT_FALSE(capped);
  auto all = limit_set_sample(t, 1000, &capped);
  EXPECT_TRUE(capped);
  ASSERT_EQ(static_cast<std::int64_t>(all.size()), t.stages.back().period);
  for (const auto& p : all)
    for (const auto& s : t.stages) {
      bool found = false;
      for (const auto& d : s.attracting.disks) found = found || inside(p, d);
      EXPECT_TRUE(found) << "level " << s.level;
    }
  const double sep = disk_separation(t.stages.back());
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b) EXPECT_GE((all[a] - all[b]).norm(), sep);
}

TEST(LimitSet, DepthTwoHasSixPoints) {
  BuildConfig c;
  c.depth = 2;
  Tower t = build_tower(c);
  EXPECT_EQ(limit_set_sample(t, 10).size(), 6u);
  c.depth = 1;
  EXPECT_THROW(limit_set_sample(build_tower(c), 2), TowerError);
}

TEST(WeakStar, ConstantObservableHasNoGap) {
  std::vector<LipschitzObservable> obs{{"one", 0.0, [](const Vecd&) { return 1.0; }}};
  for (int n = 1; n <= 3; ++n) EXPECT_EQ(weak_star_gap(default3(), obs, n).gap, 0.0);
}

TEST(WeakStar, GapWithinBoundAndNonIncreasing) {
  for (const Tower* tp : {&default3(), &default2()}) {
    auto obs = coordinate_observables(tp->dim);
    double prev = INFINITY;
    for (int n = 1; n <= tp->depth(); ++n) {
      auto g = weak_star_gap(*tp, obs, n);
      EXPECT_LE(g.gap, g.bound + 1e-13) << "level " << n;
      EXPECT_LE(g.gap, prev + 1e-13) << "level " << n;
      prev = g.gap;
    }
  }
}

TEST(Triviality, DistinctFirstStageCentresStayApart) {
  const Tower& t = default3();
  const auto& s = t.stage(1);
  const double sep = disk_separation(s);
  auto ev = triviality_probe(t, s.centers[0], s.centers[1], 30, sep / 2);
  ASSERT_EQ(ev.forward.size(), 31u);
  EXPECT_GE(ev.min_forward, sep);
  EXPECT_GE(ev.min_backward, sep);
  EXPECT_TRUE(ev.separates_forward);
  EXPECT_TRUE(ev.separates_backward);
}

TEST(Triviality, SamePointAndBudget) {
  const Tower& t = default3();
  const Vecd& x = t.stages.back().centers[0];
  EXPECT_TRUE(triviality_probe(t, x, x, 10, 0.1).same_point);
  EXPECT_THROW(triviality_probe(t, x, x + Vecd::Constant(3, 1e-6), 1 << 30, 0.1), std::invalid_argument);
}

TEST(Triviality, ShellPointOfDeepestDiskDriftsAway) {
  // inside the repelling radius the shell pushes outwards, so the forward
  // orbit of y leaves E_K while x stays on the limit set
  const Tower& t = default3();
  const auto& deep = t.stages.back();
  const auto& L = t.layout;
  const Vecd& x = deep.centers[0];
  Vecd y = x + deep.support * (L.shell0 + 0.1 * (1 - L.shell0)) * deep.frames[0].col(0);
  const double threshold = L.repel_radius() * deep.support;
  auto ev = triviality_probe(t, x, y, static_cast<int>(10 * deep.period), threshold);
  EXPECT_TRUE(ev.separates_forward);
  EXPECT_FALSE(ev.separates_backward);
  EXPECT_GE(escape_time(t, t.depth(), CycleRole::repelling, y, 10 * static_cast<int>(deep.period)), 1);
}
