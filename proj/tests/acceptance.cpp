// Acceptance run: one line per criterion, PASS or FAIL, with the measured
// numbers and the wall time.  Exit status is the number of failures.

#include "aperiodic/cocycle.hpp"
#include "aperiodic/model_maps.hpp"
#include "aperiodic/odometer.hpp"
#include "aperiodic/tower.hpp"
#include "aperiodic/verifier.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace aperiodic;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

// runtime_limit_ms <= 0 means there is no runtime clause
void run(int number, const char* id, double runtime_limit_ms, const std::function<Outcome()>& body) {
  auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  if (runtime_limit_ms > 0 && ms >= runtime_limit_ms) {
    o.pass = false;
    o.detail += "; too slow";
  }
  std::printf("%s %2d %-28s %s [%.3g ms%s]\n", o.pass ? "PASS" : "FAIL", number, id, o.detail.c_str(), ms,
              runtime_limit_ms > 0 ? (" of " + std::to_string(static_cast<long>(runtime_limit_ms))).c_str() : "");
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string num(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

Matd diag(std::initializer_list<double> logs) {
  Vecd v(static_cast<int>(logs.size()));
  int k = 0;
  for (double l : logs) v(k++) = std::exp(l);
  return v.asDiagonal();
}

Matd rot2(double a) {
  Matd r(2, 2);
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

Matd plain_product(const Cocycled& c) {
  Matd p = Matd::Identity(c.dim(), c.dim());
  for (int i = 0; i < c.period(); ++i) p = c.at(i) * p;
  return p;
}

double eig_radius(const Matd& a) {
  Eigen::EigenSolver<Matd> es(a);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double opnorm(const Matd& a) { return Eigen::JacobiSVD<Matd>(a).singularValues()(0); }

// the shared random corpus of the identity and subadditivity criteria
std::vector<Cocycled> random_corpus() {
  std::mt19937 rng(20260514);
  const double bound = std::exp(2.0);
  std::uniform_real_distribution<double> entry(-bound, bound);
  std::uniform_int_distribution<int> period(1, 8), dim(2, 3);
  std::vector<Cocycled> out;
  while (out.size() < 1000) {
    int d = dim(rng), m = period(rng);
    std::vector<Matd> mats;
    for (int i = 0; i < m; ++i) {
      Matd a(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) a(r, c) = entry(rng);
      mats.push_back(a);
    }
    try {
      out.emplace_back(std::move(mats));
    } catch (const InvalidCocycle&) {
      // a near-singular draw; take another one
    }
  }
  return out;
}

const Tower& default_tower() {
  static const Tower t = build_tower(BuildConfig{});
  return t;
}

// every clause of the tower suite, shared with the branch criterion
Outcome tower_suite(const Tower& t, bool verbose) {
  auto rep = check_theorem21(t);
  std::ostringstream why;
  bool ok = true;
  for (const auto& v : rep.items)
    if (!v.pass || !(v.margin > 0)) {
      ok = false;
      why << v.id << " margin " << num(v.margin) << " (" << v.witness << "); ";
    }
  auto clause = [&](bool good, const std::string& what) {
    if (!good) {
      ok = false;
      why << what << "; ";
    }
  };
  const auto& sh = rep.at(check::shrinking);
  double worst_ratio = 0;
  for (const auto& [k, x] : sh.values) worst_ratio = std::max(worst_ratio, x);
  clause(worst_ratio <= 0.5, "diameter ratio " + num(worst_ratio));
  const auto& c = rep.at(check::certificates);
  double cp = c.value("chi_plus_min"), cmx = c.value("chi_minus_max"), cmn = c.value("chi_minus_min");
  clause(cp >= 3.2 - 1e-9, "chi+ " + num(cp, 17));
  clause(std::abs(cmx + 1.6) <= 1e-9 && std::abs(cmn + 1.6) <= 1e-9 && cmn > -2 && cmx < -1,
         "chi- in [" + num(cmn, 17) + ", " + num(cmx, 17) + "]");
  // log||Df^-1|| >= -chi- = 1.6 at the fixed point, so the inverse margin is
  // at most 0.4 exactly and the measured value sits within rounding of it;
  // both margins are read at the 1e-9 used for the exponents
  const auto& b = rep.at(check::budget);
  double jm = b.value("jacobian_margin"), im = b.value("inverse_margin");
  clause(jm >= 0.4 - 1e-9, "J margin " + num(jm, 17));
  clause(im >= 0.4 - 1e-9, "inverse margin " + num(im, 17));
  std::ostringstream d;
  if (verbose)
    d << std::count_if(rep.items.begin(), rep.items.end(), [](const auto& v) { return v.pass; }) << "/"
      << rep.items.size() << " checks, min containment margin " << num(std::min({rep.at(check::nesting).margin,
                                                              rep.at(check::attracting).margin,
                                                              rep.at(check::repelling).margin}))
      << ", max diameter ratio " << num(worst_ratio) << ", chi+ >= " << num(cp, 12) << ", chi- in ["
      << num(cmn, 12) << ", " << num(cmx, 12) << "], budget margins " << num(jm, 12) << " (J) and " << num(im, 12)
      << " (inverse norm, 2 - " << num(b.value("max_log_inv_norm"), 17) << ")";
  if (!ok) d << (verbose ? "; " : "") << why.str();
  return {ok, d.str()};
}

// one of the suite of non-dominated, zero-volume cocycles for the surgery
Cocycled surgery_case(int index, std::mt19937& rng) {
  std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi), stretch(-0.7, 0.7);
  std::uniform_int_distribution<int> period(1, 6);
  const int m = period(rng);
  if (index % 2 == 0) {
    // R(theta_i) diag(a_i, 1/a_i), redrawn until the product is elliptic
    for (;;) {
      std::vector<Matd> mats;
      for (int i = 0; i < m; ++i) {
        double s = stretch(rng);
        mats.push_back(rot2(angle(rng)) * diag({s, -s}));
      }
      Cocycled c(mats);
      if (std::abs(plain_product(c).trace()) < 1.9) return c;
    }
  }
  // S_{i+1} Q_i S_i^{-1}: volume telescopes away and the product is
  // conjugate to a rotation, so every exponent vanishes
  std::normal_distribution<double> g;
  auto rotation = [&] {
    Matd a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = g(rng);
    Matd q = Eigen::HouseholderQR<Matd>(a).householderQ();
    if (q.determinant() < 0) q.col(0) *= -1;
    return q;
  };
  std::vector<Matd> S;
  for (int i = 0; i < m; ++i) S.push_back(rotation() * diag({stretch(rng), stretch(rng), stretch(rng)}));
  std::vector<Matd> mats;
  for (int i = 0; i < m; ++i) mats.push_back(S[static_cast<std::size_t>((i + 1) % m)] * rotation() * S[static_cast<std::size_t>(i)].inverse());
  return Cocycled(mats);
}

}  // namespace

int main() {
  std::printf("acceptance criteria, one line each\n");

  run(1, "model_spectrum", 1.0, [] {
    static const SaddleModel m = make_model_3d();
    Matd A = m.deriv(Vecd::Zero(3));
    auto sp = exponents_periodic(Cocycled({A}));
    double li = log_inv_norm(A), ld = std::log(std::abs(A.determinant()));
    bool ok = std::abs(sp.values[0] - 3.2) <= 1e-9 && std::abs(sp.values[1] + 1.6) <= 1e-9 &&
              std::abs(sp.values[2] + 1.6) <= 1e-9 && std::abs(li - 1.6) <= 1e-9 && std::abs(ld) <= 1e-9 &&
              li < 2 && ld < 1;
    return Outcome{ok, "exponents (" + num(sp.values[2], 12) + ", " + num(sp.values[1], 12) + ", " +
                           num(sp.values[0], 12) + "), log||Df^-1(0)|| = " + num(li, 12) +
                           ", log|det Df(0)| = " + num(ld, 3)};
  });

  static const std::vector<Cocycled> corpus = random_corpus();

  run(2, "exponent_sum_identity", 5000, [] {
    double worst = 0;
    for (const auto& c : corpus) {
      auto sp = exponents_periodic(c);
      worst = std::max(worst, std::abs(sp.sum() - log_jacobian_rate(c)));
    }
    return Outcome{worst <= 1e-9, "max |sum chi - J| = " + num(worst, 3) + " over 1000 cocycles"};
  });

  run(3, "subadditive_top_bound", 30000, [] {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& c : corpus) {
      double chi = exponents_periodic(c).chi_plus();
      for (int n = 1; n <= 64; ++n) worst = std::min(worst, subadditive_top_bound(c, n) - chi);
    }
    return Outcome{worst >= -1e-9, "min (bound - chi+) = " + num(worst, 3) + " over 1000 cocycles, n = 1..64"};
  });

  run(4, "model_domination", 1000, [] {
    Matd A = make_model_3d().deriv(Vecd::Zero(3));
    Cocycled c({A});
    SplittingCandidate<double> su;
    su.E = {Matd(Matd::Identity(3, 3).leftCols(2))};
    su.F = {Vecd::Unit(3, 2)};
    bool stable_unstable = is_k_dominated(c, su, 1) && is_k_dominated(c, spectral_splitting(c, 2), 1);
    // every line pair of the stable plane is invariant; try a spread of them,
    // both on the plane alone and with the unstable line added to F
    Cocycled plane({Matd(A.topLeftCorner(2, 2))});
    int tried = 0, dominated = 0;
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        if (a == b) continue;
        double ta = std::numbers::pi * a / 6, tb = std::numbers::pi * b / 6;
        Vecd u(2), w(2);
        u << std::cos(ta), std::sin(ta);
        w << std::cos(tb), std::sin(tb);
        SplittingCandidate<double> s2{{u}, {w}};
        Vecd u3 = Vecd::Zero(3);
        u3.head(2) = u;
        Matd f3 = Matd::Zero(3, 2);
        f3.col(0).head(2) = w;
        f3(2, 1) = 1;
        SplittingCandidate<double> s3{{u3}, {f3}};
        for (int k = 1; k <= 50; ++k) {
          tried += 2;
          dominated += is_k_dominated(plane, s2, k);
          dominated += is_k_dominated(c, s3, k);
        }
      }
    return Outcome{stable_unstable && dominated == 0,
                   std::string("stable plane / unstable line 1-dominated: ") + (stable_unstable ? "yes" : "no") +
                       "; splittings inside the stable plane dominated in " + std::to_string(dominated) + " of " +
                       std::to_string(tried) + " (k <= 50)"};
  });

  run(5, "tower_suite", 60000, [] { return tower_suite(default_tower(), true); });

  run(6, "centre_exponent_arithmetic", 0, [] {
    auto good = check_prop22_arithmetic(3, {-2, -1}, 1);
    auto bad = check_prop22_arithmetic(3, {-2, -1}, 3);
    // the inputs are strict bounds, so chi_c lies strictly below the
    // returned bound and a bound of 0 already certifies chi_c < 0
    bool ok = good.pass && good.bound <= 0 && !bad.pass && bad.bound == 2;
    return Outcome{ok, "(3, (-2, -1), 1): chi_c < " + num(good.bound) + ", " + (good.pass ? "pass" : "fail") +
                           "; J_ub = 3: bound " + num(bad.bound) + ", " + (bad.pass ? "pass" : "fail")};
  });

  run(7, "finite_unique_ergodicity", 0, [] {
    TowerSchedule s({2, 6, 24});
    int cases = 0, exact = 0;
    for (std::int64_t r = 0; r < 24; ++r) {
      OdometerPoint p = point_from_deepest(s, r);
      for (int level = 1; level <= 3; ++level)
        for (std::int64_t i = 0; i < s.period(level); ++i) {
          ++cases;
          // independent count over the orbit
          OdometerPoint q = p;
          std::int64_t hits = 0;
          for (int k = 0; k < 24; ++k) {
            hits += q.residues[static_cast<std::size_t>(level - 1)] == i;
            q = successor(q, s);
          }
          Rational f = birkhoff_frequency(p, s, {level, i}, 24);
          Rational mu = cylinder_measure_exact(s, {level, i});
          if (f == mu && mu == Rational::make(1, s.period(level)) && Rational::make(hits, 24) == mu) ++exact;
        }
    }
    return Outcome{exact == cases, std::to_string(exact) + "/" + std::to_string(cases) +
                                       " (start, cylinder) pairs exact in rational arithmetic"};
  });

  run(8, "weak_star_trend", 0, [] {
    auto rep = check_weak_star(default_tower());
    std::ostringstream d;
    for (int n = 1; n <= 3; ++n) {
      const auto& v = rep.at("level " + std::to_string(n));
      d << "gap_" << n << " = " << num(v.value("gap"), 3) << " <= " << num(v.value("bound"), 3) << "; ";
    }
    d << "non-increasing: " << (rep.at("non_increasing").pass ? "yes" : "no");
    return Outcome{rep.all_pass(), d.str()};
  });

  run(9, "finite_horizon_triviality", 0, [] {
    const Tower& t = default_tower();
    auto rep = check_triviality(t);
    const auto& pairs = rep.at("separated_pairs");
    const double sep = disk_separation(t.stage(1));
    const double horizon = 10.0 * static_cast<double>(t.stages.back().period);
    bool pairs_ok = pairs.value("pairs") > 0 && pairs.value("min_distance") >= sep &&
                    pairs.value("horizon") == horizon;
    const auto& rep_esc = rep.at("repelling_escape");
    const auto& att_esc = rep.at("attracting_escape");
    bool ok = pairs_ok && rep_esc.pass && att_esc.pass && rep_esc.value("samples") >= 100;

    // R_K is mapped onto a superset of itself, so f^-1 keeps it: count the
    // literal backward exits for the record
    RealizedMap f(t);
    const auto& deep = t.stages.back();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.2);
    int literal = 0;
    for (int k = 0; k < 100; ++k) {
      auto j = static_cast<std::size_t>(k % deep.period);
      Vecd y = deep.centers[j] + deep.support * (t.layout.shell0 + u(rng) * (1 - t.layout.shell0)) * deep.frames[j].col(0);
      for (int s = 0; s < horizon; ++s) {
        try {
          y = f.inverse(y);
        } catch (const DomainError&) {
          ++literal;
          break;
        }
        bool in = false;
        for (const auto& e : deep.repelling.disks) in = in || (y - e.center).norm() < e.radius;
        if (!in) {
          ++literal;
          break;
        }
      }
    }
    std::ostringstream d;
    d << static_cast<long>(pairs.value("pairs")) << " cross-disk pairs, min distance "
      << num(pairs.value("min_distance")) << " >= stage-1 separation " << num(sep) << " over " << horizon
      << " steps both ways; 100 points of R_K off C leave R_K forward within " << rep_esc.value("max_escape_time")
      << " steps, 100 points of A_K off R_K leave A_K backward within " << att_esc.value("max_escape_time")
      << "; backward exits of R_K: " << literal << "/100 (f^-1 maps R_K into itself)";
    return Outcome{ok, d.str()};
  });

  run(10, "sink_source_surgery", 30000, [] {
    std::mt19937 rng(11);
    int ok_cases = 0;
    double worst_sink = 0, worst_source = 0, worst_pert = 0;
    std::string why;
    for (int i = 0; i < 20; ++i) {
      Cocycled c = surgery_case(i, rng);
      if (std::abs(log_jacobian_rate(c)) > 1e-12) {
        why = "case " + std::to_string(i) + " has nonzero volume";
        continue;
      }
      bool dominated = false;
      for (int k = 1; k <= 50 && !dominated; ++k) dominated = find_dominated_splitting(c, k).has_value();
      if (dominated) {
        why = "case " + std::to_string(i) + " is dominated";
        continue;
      }
      auto r = surgery_sink_source(c, 0.1);
      double rs = eig_radius(plain_product(r.sink));
      double ru = eig_radius(plain_product(r.source).inverse());
      double pert = 0;
      for (int j = 0; j < c.period(); ++j) {
        const Matd I = Matd::Identity(c.dim(), c.dim());
        pert = std::max({pert, opnorm(r.sink.at(j) * c.at(j).inverse() - I),
                         opnorm(r.source.at(j) * c.at(j).inverse() - I)});
      }
      worst_sink = std::max(worst_sink, rs);
      worst_source = std::max(worst_source, ru);
      worst_pert = std::max(worst_pert, pert);
      if (rs < 1 && ru < 1 && pert <= 0.1 + 1e-12)
        ++ok_cases;
      else
        why = "case " + std::to_string(i) + " failed the oracle";
    }
    std::ostringstream d;
    d << ok_cases << "/20 cocycles (10 planar, 10 spatial); worst sink radius " << num(worst_sink)
      << ", worst source inverse radius " << num(worst_source) << ", max ||P - I|| " << num(worst_pert);
    if (!why.empty()) d << "; " << why;
    return Outcome{ok_cases == 20, d.str()};
  });

  run(11, "branch_disjointness", 0, [] {
    Tower seed = seed_stage(make_model_3d(false), 2, 0.2);
    auto leaves = branch_forest(seed, 3, 3, 0.5);
    int pairs = 0, disjoint = 0, passing = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    std::string why;
    for (std::size_t a = 0; a < leaves.size(); ++a)
      for (std::size_t b = a + 1; b < leaves.size(); ++b) {
        ++pairs;
        double g = class_separation(leaves[a], leaves[b]);
        min_gap = std::min(min_gap, g);
        disjoint += g > 0;
      }
    for (const auto& leaf : leaves) {
      auto o = tower_suite(leaf, false);
      if (o.pass)
        ++passing;
      else
        why = "leaf " + leaf.word + ": " + o.detail;
    }
    std::ostringstream d;
    d << leaves.size() << " leaves, " << disjoint << "/" << pairs << " pairs disjoint (min gap " << num(min_gap)
      << "), " << passing << "/" << leaves.size() << " leaves pass the tower suite";
    if (!why.empty()) d << "; " << why;
    return Outcome{leaves.size() == 8 && pairs == 28 && disjoint == 28 && passing == 8, d.str()};
  });

  run(12, "fault_detection", 0, [] {
    const Tower& t = default_tower();
    int detected = 0;
    std::ostringstream d;
    for (Fault f : kAllFaults) {
      auto rep = check_theorem21(inject_fault(t, f));
      const auto& v = rep.at(fault_target(f));
      bool named = v.witness.find("stage") != std::string::npos;
      if (!v.pass && named) ++detected;
      d << fault_target(f) << ": " << (v.pass ? "missed" : "\"" + v.witness + "\"") << "; ";
    }
    return Outcome{detected == 7, std::to_string(detected) + "/7 detected; " + d.str()};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
