#include "aperiodic/verifier.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace aperiodic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string where(int level, std::int64_t i) {
  return "stage " + std::to_string(level) + " disk " + std::to_string(i);
}

// unit vectors, evenly spread: angles in 2D, a Fibonacci lattice in 3D
std::vector<Vecd> directions(int dim, int count) {
  std::vector<Vecd> out;
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      double a = 2 * std::numbers::pi * k / count;
      Vecd v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
    return out;
  }
  const double golden = std::numbers::pi * (3 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    double z = 1 - 2 * (k + 0.5) / count;
    double r = std::sqrt(1 - z * z);
    Vecd v(3);
    v << r * std::cos(golden * k), r * std::sin(golden * k), z;
    out.push_back(v);
  }
  return out;
}

// the coordinate axes come first so that the extreme points of a ball along
// its own frame are always sampled
std::vector<Vecd> sphere_sample(int dim, int count) {
  std::vector<Vecd> out;
  for (int a = 0; a < dim; ++a) {
    out.push_back(Vecd::Unit(dim, a));
    out.push_back(-Vecd::Unit(dim, a));
  }
  auto rest = directions(dim, count);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

double op_norm(const Matd& a) {
  Eigen::JacobiSVD<Matd> svd(a);
  return svd.singularValues()(0);
}

CheckVerdict nesting_check(const Tower& t) {
  CheckVerdict v;
  v.id = check::nesting;
  v.margin = kInf;
  // margin of the best host: host radius - centre distance - inner radius
  auto best_host = [](const Disk& in, const std::vector<Disk>& hosts) {
    double best = -kInf;
    for (const auto& h : hosts) best = std::max(best, h.radius - (in.center - h.center).norm() - in.radius);
    return best;
  };
  for (const auto& s : t.stages) {
    const auto& R = s.repelling.disks;
    for (std::size_t i = 0; i < R.size(); ++i) {
      double m = best_host(R[i], s.attracting.disks);
      if (m < v.margin) {
        v.margin = m;
        if (m <= 0) v.witness = where(s.level, static_cast<std::int64_t>(i)) + ": repelling disk not inside an attracting disk";
      }
    }
  }
  for (int n = 1; n < t.depth(); ++n) {
    const auto& A = t.stage(n + 1).attracting.disks;
    for (std::size_t i = 0; i < A.size(); ++i) {
      double m = best_host(A[i], t.stage(n).repelling.disks);
      if (m < v.margin) {
        v.margin = m;
        if (m <= 0)
          v.witness = where(n + 1, static_cast<std::int64_t>(i)) + ": attracting disk not inside a stage " +
                      std::to_string(n) + " repelling disk";
      }
    }
  }
  v.pass = v.margin > 0;
  if (v.pass) v.witness.clear();
  return v;
}

// forward image of every attracting disk inside the next one, or backward
// image of every repelling disk inside the next one
CheckVerdict cycle_check(const Tower& t, const RealizedMap& f, const std::vector<Vecd>& dirs, CycleRole role) {
  CheckVerdict v;
  v.id = role == CycleRole::attracting ? check::attracting : check::repelling;
  v.margin = kInf;
  const bool fwd = role == CycleRole::attracting;
  for (const auto& s : t.stages) {
    const auto& D = fwd ? s.attracting.disks : s.repelling.disks;
    const auto m = static_cast<std::int64_t>(D.size());
    for (std::int64_t i = 0; i < m; ++i) {
      const Disk& src = D[static_cast<std::size_t>(i)];
      const Disk& dst = D[static_cast<std::size_t>((i + 1) % m)];
      double worst = 0;
      bool left = false;
      auto probe = [&](const Vecd& x) {
        try {
          Vecd y = fwd ? f.eval(x) : f.inverse(x);
          worst = std::max(worst, (y - dst.center).norm());
        } catch (const DomainError&) {
          left = true;
        }
      };
      probe(src.center);
      for (const auto& d : dirs) probe(src.center + src.radius * (src.frame * d));
      double mg = left ? -kInf : dst.radius - worst;
      if (mg < v.margin) {
        v.margin = mg;
        if (mg <= 0)
          v.witness = where(s.level, i) + (fwd ? ": image not inside the next attracting disk"
                                               : ": preimage not inside the next repelling disk");
      }
    }
  }
  v.pass = v.margin > 0;
  if (v.pass) v.witness.clear();
  return v;
}

CheckVerdict shrinking_check(const Tower& t) {
  CheckVerdict v;
  v.id = check::shrinking;
  v.margin = kInf;
  for (int n = 1; n < t.depth(); ++n) {
    double ratio = max_diameter(t.stage(n + 1)) / max_diameter(t.stage(n));
    v.values.emplace_back("ratio_" + std::to_string(n + 1), ratio);
    double mg = 0.5 - ratio;
    if (mg < v.margin) {
      v.margin = mg;
      if (mg < 0) v.witness = "stage " + std::to_string(n + 1) + ": diameter ratio " + fmt(ratio) + " above 1/2";
    }
  }
  if (t.depth() < 2) v.margin = 0.5;
  v.pass = v.margin >= 0;
  if (v.pass) v.witness.clear();
  return v;
}

CheckVerdict periods_check(const Tower& t) {
  CheckVerdict v;
  v.id = check::periods;
  v.margin = kInf;
  auto fail = [&](std::string w) {
    if (v.witness.empty()) v.witness = std::move(w);
    v.margin = std::min(v.margin, -1.0);
  };
  for (const auto& s : t.stages) {
    auto m = s.period;
    const std::string st = "stage " + std::to_string(s.level);
    if (m < 1) fail(st + ": period below 1");
    if (static_cast<std::int64_t>(s.attracting.disks.size()) != m ||
        static_cast<std::int64_t>(s.repelling.disks.size()) != m)
      fail(st + ": disk count differs from the period");
    if (s.cert.period != m || s.cert.cocycle.period() != m) fail(st + ": certificate period differs from the stage period");
  }
  for (int n = 1; n < t.depth(); ++n) {
    auto a = t.stage(n).period, b = t.stage(n + 1).period;
    const std::string st = "stage " + std::to_string(n + 1);
    if (a <= 0 || b % a != 0) {
      fail(st + ": period " + std::to_string(b) + " not a multiple of " + std::to_string(a));
      continue;
    }
    double growth = static_cast<double>(b / a);
    if (growth < 2) fail(st + ": period does not grow");
    v.margin = std::min(v.margin, growth - 2);
  }
  if (v.margin == kInf) v.margin = 0;
  v.pass = v.witness.empty();
  return v;
}

CheckVerdict budget_check(const Tower& t, const RealizedMap& f, const TowerCheckOptions& opt) {
  CheckVerdict v;
  v.id = check::budget;
  const auto dirs = directions(t.dim, opt.budget_directions);
  const double insert = t.layout.insert;
  // radii in disk units: log spaced through the insert, then linear
  std::vector<double> radii{0.0};
  for (int k = 0; k < opt.budget_inner_radii; ++k)
    radii.push_back(insert * std::pow(1e-3, 1.0 - static_cast<double>(k) / opt.budget_inner_radii));
  double detmax = -kInf, invmax = -kInf;
  std::string det_at, inv_at;
  long samples = 0;
  std::vector<std::pair<std::string, double>> per_stage;
  for (const auto& s : t.stages) {
    // the top stage is sampled out to its attracting radius; deeper supports
    // lie inside the stage-1 attracting disks and are sampled across
    double outer = s.level == 1 ? t.layout.attract_radius() : 0.999;
    std::vector<double> rs = radii;
    double sdet = -kInf, sinv = -kInf;
    for (int k = 0; k <= opt.budget_outer_radii; ++k)
      rs.push_back(insert + (outer - insert) * k / opt.budget_outer_radii);
    for (std::size_t i = 0; i < s.centers.size(); ++i) {
      for (double r : rs) {
        for (const auto& d : dirs) {
          Vecd x = s.centers[i] + s.support * r * (s.frames[i] * d);
          Matd J = f.deriv(x);
          double ld = std::log(std::abs(J.determinant()));
          double li = log_inv_norm(J);
          ++samples;
          sdet = std::max(sdet, ld);
          sinv = std::max(sinv, li);
          if (ld > detmax) {
            detmax = ld;
            det_at = where(s.level, static_cast<std::int64_t>(i)) + " at radius " + fmt(r);
          }
          if (li > invmax) {
            invmax = li;
            inv_at = where(s.level, static_cast<std::int64_t>(i)) + " at radius " + fmt(r);
          }
          if (r == 0) break;
        }
      }
    }
    const std::string key = "stage" + std::to_string(s.level);
    per_stage.emplace_back(key + "_max_log_det", sdet);
    per_stage.emplace_back(key + "_max_log_inv_norm", sinv);
  }
  v.values = {{"max_log_det", detmax},
              {"max_log_inv_norm", invmax},
              {"jacobian_margin", 1 - detmax},
              {"inverse_margin", 2 - invmax},
              {"samples", static_cast<double>(samples)}};
  v.values.insert(v.values.end(), per_stage.begin(), per_stage.end());
  v.margin = std::min(1 - detmax, 2 - invmax);
  v.pass = detmax < 1 && invmax < 2;
  if (!v.pass)
    v.witness = detmax >= 1 ? "log|det Df| = " + fmt(detmax) + " at " + det_at
                            : "log||Df^-1|| = " + fmt(invmax) + " at " + inv_at;
  v.note = "largest log|det Df| at " + det_at + ", largest log||Df^-1|| at " + inv_at;
  return v;
}

CheckVerdict certificate_check(const Tower& t, const RealizedMap& f, const TowerCheckOptions& opt) {
  CheckVerdict v;
  v.id = check::certificates;
  v.margin = kInf;
  const auto th = thresholds_for(t.dim);
  double cp_min = kInf, cm_max = -kInf, cm_min = kInf, slack_min = kInf;
  // the first failure found names the witness
  auto fail = [&](double mg, std::string w) {
    v.margin = std::min(v.margin, mg);
    if (v.witness.empty()) v.witness = std::move(w);
  };
  for (const auto& s : t.stages) {
    const std::string st = "stage " + std::to_string(s.level);
    const auto& c = s.cert;
    auto sp = exponents_periodic(c.cocycle);
    cp_min = std::min(cp_min, sp.chi_plus());
    cm_max = std::max(cm_max, sp.chi_minus());
    cm_min = std::min(cm_min, sp.chi_minus());
    double slack = std::min({sp.chi_plus() - th.chi_plus, sp.chi_minus() - th.chi_minus_lo,
                             th.chi_minus_hi - sp.chi_minus()});
    slack_min = std::min(slack_min, slack);
    if (slack <= 0)
      fail(slack, st + ": exponents (" + fmt(sp.chi_plus()) + ", " + fmt(sp.chi_minus()) + ") outside the window");
    else
      v.margin = std::min(v.margin, slack);

    double in_e = -kInf;
    for (const auto& e : s.repelling.disks) in_e = std::max(in_e, e.radius - (c.location - e.center).norm());
    if (in_e <= 0) fail(-1, st + ": periodic point outside every repelling disk");

    // the stored cocycle must be Df along the orbit.  The orbit is checked
    // one step at a time through the stored centres: iterating a saddle
    // orbit numerically amplifies rounding by e^chi+ per step
    if ((c.location - s.centers.front()).norm() > opt.orbit_tol * std::max(1.0, c.location.norm()))
      fail(-1, st + ": periodic point is not the first centre");
    const auto m = static_cast<std::int64_t>(s.centers.size());
    try {
      for (std::int64_t j = 0; j < c.cocycle.period() && m > 0; ++j) {
        const Vecd& x = s.centers[static_cast<std::size_t>(j % m)];
        const Vecd& next = s.centers[static_cast<std::size_t>((j + 1) % m)];
        Matd J;
        Vecd y = f.eval(x, &J);
        const Matd& A = c.cocycle.at(j);
        if ((y - next).norm() > opt.orbit_tol * std::max(1.0, next.norm())) {
          fail(-1, st + ": centre " + std::to_string(j) + " does not map to the next centre");
          break;
        }
        if ((J - A).norm() > opt.orbit_tol * std::max(1.0, A.norm())) {
          fail(-1, st + ": stored matrix " + std::to_string(j) + " is not Df along the orbit");
          break;
        }
      }
    } catch (const DomainError&) {
      fail(-1, st + ": orbit leaves the domain");
    }
  }
  v.values = {{"chi_plus_min", cp_min},
              {"chi_minus_max", cm_max},
              {"chi_minus_min", cm_min},
              {"exponent_slack", slack_min}};
  v.pass = v.margin > 0;
  if (v.pass) v.witness.clear();
  return v;
}

int fault_level(const Tower& t) { return t.depth() >= 2 ? 2 : 1; }

}  // namespace

double CheckVerdict::value(const std::string& key) const {
  for (const auto& [k, x] : values)
    if (k == key) return x;
  throw std::out_of_range("check " + id + " has no value " + key);
}

bool VerdictReport::all_pass() const {
  return std::all_of(items.begin(), items.end(), [](const CheckVerdict& v) { return v.pass; });
}

const CheckVerdict& VerdictReport::at(const std::string& id) const {
  for (const auto& v : items)
    if (v.id == id) return v;
  throw std::out_of_range("report has no check " + id);
}

ExponentThresholds thresholds_for(int dim) {
  ExponentThresholds th;
  th.chi_plus = dim == 3 ? 3.0 : 1.0;
  return th;
}

VerdictReport check_theorem21(const Tower& t, const TowerCheckOptions& opt) {
  if (t.stages.empty()) throw std::invalid_argument("tower has no stages");
  VerdictReport rep;
  rep.subject = t.word.empty() ? "tower" : "tower " + t.word;
  RealizedMap f(t);
  auto dirs = sphere_sample(t.dim, opt.sphere_directions);
  rep.add(nesting_check(t));
  rep.add(cycle_check(t, f, dirs, CycleRole::attracting));
  rep.add(cycle_check(t, f, dirs, CycleRole::repelling));
  rep.add(shrinking_check(t));
  rep.add(periods_check(t));
  rep.add(budget_check(t, f, opt));
  rep.add(certificate_check(t, f, opt));
  return rep;
}

const char* fault_target(Fault f) {
  switch (f) {
    case Fault::nesting: return check::nesting;
    case Fault::attracting: return check::attracting;
    case Fault::repelling: return check::repelling;
    case Fault::shrinking: return check::shrinking;
    case Fault::periods: return check::periods;
    case Fault::budget: return check::budget;
    case Fault::certificates: return check::certificates;
  }
  throw std::invalid_argument("unknown fault");
}

Tower inject_fault(const Tower& t, Fault f) {
  Tower c = t;
  auto& s = c.stages.at(static_cast<std::size_t>(fault_level(t) - 1));
  switch (f) {
    case Fault::nesting:
      s.repelling.disks[0].radius = 1.2 * s.attracting.disks[0].radius;
      break;
    case Fault::attracting:
      s.attracting.disks[0].radius *= 10;
      break;
    case Fault::repelling:
      s.repelling.disks[0].radius *= 1.5;
      break;
    case Fault::shrinking:
      for (auto& d : s.attracting.disks) d.radius *= 25;
      for (auto& d : s.repelling.disks) d.radius *= 25;
      break;
    case Fault::periods:
      s.period = c.stages.front().period == s.period ? s.period + 1 : c.stages.front().period;
      break;
    case Fault::budget: {
      Vecd r(c.dim);
      if (c.dim == 3)
        r << -2.5, -2.5, 5.0;
      else
        r << -2.5, 2.5;
      c.insert_rates = r;
      break;
    }
    case Fault::certificates: {
      Matd a = Matd::Zero(c.dim, c.dim);
      if (c.dim == 3)
        a.diagonal() << std::exp(-1.6), std::exp(-1.6), std::exp(2.9);
      else
        a.diagonal() << std::exp(-1.6), std::exp(0.9);
      s.cert.cocycle = Cocycled(std::vector<Matd>(static_cast<std::size_t>(s.period), a));
      s.cert.spectrum = exponents_periodic(s.cert.cocycle);
      break;
    }
  }
  return c;
}

// The inputs are strict bounds (chi+ >= lb with J < J_ub and chi- > lo), so a
// bound of exactly zero already forces chi_c < 0.
Prop22Result check_prop22_arithmetic(double chi_plus_lb, std::pair<double, double> chi_minus_bounds,
                                     double J_ub) {
  auto [lo, hi] = chi_minus_bounds;
  if (!std::isfinite(chi_plus_lb) || !std::isfinite(lo) || !std::isfinite(hi) || !std::isfinite(J_ub))
    throw std::invalid_argument("exponent bounds must be finite");
  if (lo > hi) throw std::invalid_argument("chi- interval is empty");
  Prop22Result r;
  r.bound = J_ub - chi_plus_lb - lo;
  if (!(chi_plus_lb > 0))
    r.reason = "chi+ lower bound " + fmt(chi_plus_lb) + " is not positive";
  else if (!(hi < 0))
    r.reason = "chi- upper bound " + fmt(hi) + " is not negative";
  else if (r.bound > 0)
    r.reason = "centre exponent bound " + fmt(r.bound) + " is positive";
  else
    r.pass = true;
  if (r.pass) r.reason = "chi_c < " + fmt(r.bound) + " <= 0: hyperbolic limit";
  return r;
}

Prop22Result prop22_from_tower(const Tower& t, const VerdictReport& thm) {
  const auto& b = thm.at(check::budget);
  double cp = kInf, hi = -kInf;
  for (const auto& s : t.stages) {
    auto sp = exponents_periodic(s.cert.cocycle);
    cp = std::min(cp, sp.chi_plus());
    hi = std::max(hi, sp.chi_minus());
  }
  double lo = -b.value("max_log_inv_norm");
  if (t.dim == 2) {
    Prop22Result r;
    r.bound = b.value("max_log_det") - cp - lo;
    r.pass = cp > 0 && hi < 0;
    r.reason = "dimension 2 has no centre exponent; chi+ > 0 > chi- decides";
    return r;
  }
  return check_prop22_arithmetic(cp, {lo, hi}, b.value("max_log_det"));
}

VerdictReport check_semicontinuity_chain(const std::vector<ExponentSpectrum<double>>& certs, int dim) {
  if (certs.size() < 2) throw std::invalid_argument("the chain needs at least two certified stages");
  const auto th = thresholds_for(dim);
  VerdictReport rep;
  rep.subject = "exponent chain";
  double cp = kInf, cm = -kInf;
  for (std::size_t i = 0; i < certs.size(); ++i) {
    CheckVerdict v;
    v.id = "stage " + std::to_string(i + 1);
    double a = certs[i].chi_plus(), b = certs[i].chi_minus();
    v.margin = std::min(a - th.chi_plus, th.chi_minus_hi - b);
    v.pass = a >= th.chi_plus && b <= th.chi_minus_hi;
    if (!v.pass) v.witness = "chi+ = " + fmt(a) + ", chi- = " + fmt(b);
    v.values = {{"chi_plus", a}, {"chi_minus", b}};
    cp = std::min(cp, a);
    cm = std::max(cm, b);
    rep.add(v);
  }
  CheckVerdict lim;
  lim.id = "limit_bounds";
  lim.pass = rep.all_pass();
  lim.margin = std::min(cp - th.chi_plus, th.chi_minus_hi - cm);
  lim.values = {{"chi_plus_lb", cp}, {"chi_minus_ub", cm}};
  lim.note = "chi+(mu) >= " + fmt(th.chi_plus) + " and chi-(mu) <= " + fmt(th.chi_minus_hi) +
             ", conditional on upper semicontinuity of the exponents along the chain";
  if (!lim.pass) lim.witness = "a stage of the chain misses the thresholds";
  rep.add(lim);
  return rep;
}

VerdictReport check_semicontinuity_chain(const Tower& t) {
  std::vector<ExponentSpectrum<double>> sp;
  for (const auto& s : t.stages) sp.push_back(exponents_periodic(s.cert.cocycle));
  return check_semicontinuity_chain(sp, t.dim);
}

VerdictReport check_weak_star(const Tower& t) {
  VerdictReport rep;
  rep.subject = "weak-* convergence";
  auto obs = coordinate_observables(t.dim);
  // the gaps are rounding-level sums; compare them up to that
  constexpr double kRound = 1e-13;
  double prev = kInf;
  CheckVerdict mono;
  mono.id = "non_increasing";
  mono.pass = true;
  mono.margin = kInf;
  for (int n = 1; n <= t.depth(); ++n) {
    auto g = weak_star_gap(t, obs, n);
    CheckVerdict v;
    v.id = "level " + std::to_string(n);
    v.values = {{"gap", g.gap}, {"bound", g.bound}};
    v.margin = g.bound - g.gap;
    v.pass = g.gap <= g.bound + kRound;
    if (!v.pass) v.witness = "gap " + fmt(g.gap) + " above the bound " + fmt(g.bound);
    if (n > 1) {
      mono.margin = std::min(mono.margin, prev - g.gap);
      if (g.gap > prev + kRound) {
        mono.pass = false;
        if (mono.witness.empty()) mono.witness = "gap grows at level " + std::to_string(n);
      }
    }
    prev = g.gap;
    rep.add(v);
  }
  if (mono.margin == kInf) mono.margin = 0;
  rep.add(mono);
  return rep;
}

VerdictReport check_triviality(const Tower& t, const TrivialityOptions& opt) {
  VerdictReport rep;
  rep.subject = "trivial dynamics";
  const auto& deep = t.stages.back();
  const int horizon = opt.horizon > 0 ? opt.horizon : static_cast<int>(10 * deep.period);
  RealizedMap f(t);
  const double sep = disk_separation(t.stage(1));
  const auto m1 = t.stage(1).period;

  // pairs of limit-set samples in different stage-1 disks stay apart both ways
  auto samples = limit_set_sample(t, deep.period);
  const std::size_t n = samples.size();
  std::vector<std::vector<Vecd>> fw(n), bw(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vecd x = samples[i], y = samples[i];
    for (int k = 0; k <= horizon; ++k) {
      fw[i].push_back(x);
      bw[i].push_back(y);
      if (k < horizon) {
        x = f.eval(x);
        y = f.inverse(y);
      }
    }
  }
  CheckVerdict pairs;
  pairs.id = "separated_pairs";
  double worst = kInf;
  long count = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (static_cast<std::int64_t>(i) % m1 == static_cast<std::int64_t>(j) % m1) continue;
      ++count;
      for (int k = 0; k <= horizon; ++k) {
        double d = std::min((fw[i][k] - fw[j][k]).norm(), (bw[i][k] - bw[j][k]).norm());
        if (d < worst) {
          worst = d;
          if (d < sep / 2)
            pairs.witness = "samples " + std::to_string(i) + " and " + std::to_string(j) + " within " + fmt(d) +
                            " at step " + std::to_string(k);
        }
      }
    }
  pairs.margin = worst - sep / 2;
  pairs.pass = count > 0 && worst >= sep / 2;
  if (count == 0) pairs.witness = "no pair of samples in different stage-1 disks";
  pairs.values = {{"pairs", static_cast<double>(count)},
                  {"min_distance", worst},
                  {"threshold", sep / 2},
                  {"horizon", static_cast<double>(horizon)}};
  if (pairs.pass) pairs.witness.clear();
  rep.add(pairs);

  // off the limit set: points in the deepest shells leave the disks
  std::mt19937 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0, 1);
  std::normal_distribution<double> gauss;
  const auto& L = t.layout;
  auto shell_point = [&](double u0, double u1, std::int64_t* disk) {
    auto j = static_cast<std::int64_t>(unit(rng) * static_cast<double>(deep.period)) % deep.period;
    Vecd d(t.dim);
    for (int a = 0; a < t.dim; ++a) d(a) = gauss(rng);
    d.normalize();
    double u = u0 + (u1 - u0) * unit(rng);
    double rho = L.shell0 + u * (1 - L.shell0);
    *disk = j;
    const auto ju = static_cast<std::size_t>(j);
    return Vecd(deep.centers[ju] + deep.support * rho * (deep.frames[ju] * d));
  };
  auto escape = [&](const char* id, CycleRole role, double u0, double u1) {
    CheckVerdict v;
    v.id = id;
    int worst_t = 0;
    for (int k = 0; k < opt.samples; ++k) {
      std::int64_t j = 0;
      Vecd y = shell_point(u0, u1, &j);
      int e = escape_time(t, t.depth(), role, y, horizon);
      if (e < 0) {
        worst_t = horizon + 1;
        if (v.witness.empty()) v.witness = "sample near " + where(t.depth(), j) + " never escapes";
      } else {
        worst_t = std::max(worst_t, e);
      }
    }
    v.margin = horizon - worst_t;
    v.pass = worst_t <= horizon;
    v.values = {{"max_escape_time", static_cast<double>(worst_t)}, {"samples", static_cast<double>(opt.samples)}};
    rep.add(v);
  };
  // inside E the shell pushes outward, inside D past its radius it pulls inward
  const double du = 0.05;
  escape("repelling_escape", CycleRole::repelling, du, L.repel_u - du);
  escape("attracting_escape", CycleRole::attracting, 0.5 + du, L.attract_u - du);
  return rep;
}

double class_separation(const Tower& a, const Tower& b) {
  if (a.stages.empty() || b.stages.empty()) throw std::invalid_argument("towers need stages");
  double gap = kInf;
  for (const auto& d : a.stages.back().attracting.disks)
    for (const auto& e : b.stages.back().attracting.disks)
      gap = std::min(gap, (d.center - e.center).norm() - d.radius - e.radius);
  return gap;
}

// ----- periodic-point properties -------------------------------------------

namespace {

const OrbitRecord& find_record(const std::vector<OrbitRecord>& db, const std::string& id) {
  for (const auto& r : db)
    if (r.id == id) return r;
  throw std::invalid_argument("no orbit record named " + id);
}

bool declared(const OrbitRecord& a, const OrbitRecord& b, std::vector<std::string> OrbitRecord::*rel) {
  auto has = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  return has(a.*rel, b.id) || has(b.*rel, a.id);
}

}  // namespace

VerdictReport check_property_P(const std::vector<OrbitRecord>& db, const std::string& pid) {
  for (const auto& r : db) {
    for (const auto& q : r.homoclinic_to) find_record(db, q);
    for (const auto& q : r.robust_cycle_with) find_record(db, q);
  }
  const auto& p = find_record(db, pid);
  VerdictReport rep;
  rep.subject = "property P of " + pid;

  auto flags = [](const OrbitRecord& r) -> std::optional<EigenFlags> {
    try {
      return eigenvalue_flags(r.cocycle);
    } catch (const NotHyperbolic&) {
      return std::nullopt;
    }
  };

  CheckVerdict cs;
  cs.id = "complex_stable_partner";
  cs.note = "homoclinic relation as declared in the records";
  CheckVerdict cu;
  cu.id = "complex_unstable_partner";
  cu.note = "robust heterodimensional cycle as declared in the records";
  std::vector<const OrbitRecord*> related;
  for (const auto& q : db) {
    if (q.id == p.id) continue;
    auto fl = flags(q);
    bool hom = declared(p, q, &OrbitRecord::homoclinic_to);
    if (hom) related.push_back(&q);
    if (fl && hom && fl->stable_complex) {
      cs.pass = true;
      cs.witness = q.id;
    }
    if (fl && fl->unstable_complex && declared(p, q, &OrbitRecord::robust_cycle_with)) {
      cu.pass = true;
      cu.witness = q.id;
    }
  }
  if (!cs.pass) cs.witness = "no homoclinically related record with non-real stable eigenvalues";
  if (!cu.pass) cu.witness = "no record in a robust cycle with non-real unstable eigenvalues";
  cs.margin = cs.pass ? 1 : -1;
  cu.margin = cu.pass ? 1 : -1;
  rep.add(cs);
  rep.add(cu);

  CheckVerdict js;
  js.id = "jacobian_signs";
  CheckVerdict eb;
  eb.id = "exponent_bounds";
  const auto th = thresholds_for(3);
  bool neg = false, pos = false, neg_ok = false, pos_ok = false;
  std::string neg_id, pos_id;
  for (const auto* q : related) {
    double J = log_jacobian_rate(q->cocycle);
    auto sp = exponents_periodic(q->cocycle);
    bool ok = sp.chi_plus() > th.chi_plus && sp.chi_minus() < th.chi_minus_hi;
    if (J < 0) {
      neg = true;
      if (ok && !neg_ok) neg_id = q->id;
      neg_ok = neg_ok || ok;
    } else if (J > 0) {
      pos = true;
      if (ok && !pos_ok) pos_id = q->id;
      pos_ok = pos_ok || ok;
    }
  }
  js.pass = neg && pos;
  js.margin = js.pass ? 1 : -1;
  if (!js.pass)
    js.witness = !neg ? "no related record with negative log-Jacobian" : "no related record with positive log-Jacobian";
  eb.pass = neg_ok && pos_ok;
  eb.margin = eb.pass ? 1 : -1;
  if (eb.pass)
    eb.note = "p- = " + neg_id + ", p+ = " + pos_id;
  else
    eb.witness = "no related pair with chi+ > 3 and chi- < -1 of both Jacobian signs";
  rep.add(js);
  rep.add(eb);
  return rep;
}

NoDominationResult no_domination_for(const Cocycled& c, const std::optional<TangencyCertificate>& cert,
                                     int K_max) {
  if (K_max < 1) throw std::invalid_argument("K_max must be positive");
  NoDominationResult r;
  const int d = c.dim();
  auto sp = exponents_periodic(c);
  int stable_dim = 0;
  for (double v : sp.values)
    if (v < 0) ++stable_dim;
  auto gaps = spectral_gap_dims(c);
  constexpr double kTangentAngle = 1e-6;
  const bool tangency = cert && cert->angle_residual <= kTangentAngle;
  for (int dE = 1; dE < d; ++dE) {
    bool excluded = true;
    if (std::find(gaps.begin(), gaps.end(), dE) != gaps.end()) {
      auto s = spectral_splitting(c, dE);
      for (int k = 1; k <= K_max; ++k) {
        if (is_k_dominated(c, s, k)) {
          excluded = false;
          if (r.dominated_k == 0) {
            r.dominated_k = k;
            r.dominated_dim = dE;
          }
          break;
        }
      }
      // a tangency between W^s and W^u rules out the hyperbolic splitting
      if (!excluded && dE == stable_dim && tangency) excluded = true;
    }
    (dE == 1 ? r.dim1_excluded : r.dim2_excluded) = excluded;
  }
  if (d == 2) r.dim2_excluded = true;
  return r;
}

VerdictReport check_property_P_prime(const OrbitRecord& p, const std::optional<TangencyCertificate>& cert,
                                     int K_max) {
  VerdictReport rep;
  rep.subject = "property P' of " + p.id;
  auto sp = exponents_periodic(p.cocycle);
  double J = log_jacobian_rate(p.cocycle);
  CheckVerdict e;
  e.id = "exponents_and_volume";
  constexpr double kVolumeTol = 1e-9;
  e.margin = std::min({-1 - sp.chi_minus(), sp.chi_plus() - 3, kVolumeTol - std::abs(J)});
  e.pass = sp.chi_minus() < -1 && sp.chi_plus() > 3 && std::abs(J) <= kVolumeTol;
  e.values = {{"chi_plus", sp.chi_plus()}, {"chi_minus", sp.chi_minus()}, {"log_jacobian", J}};
  if (!e.pass) e.witness = "chi+ = " + fmt(sp.chi_plus()) + ", chi- = " + fmt(sp.chi_minus()) + ", J = " + fmt(J);
  rep.add(e);

  CheckVerdict nd;
  nd.id = "no_domination";
  auto r = no_domination_for(p.cocycle, cert, K_max);
  nd.pass = r.dim1_excluded && r.dim2_excluded;
  nd.margin = nd.pass ? 1 : -1;
  nd.values = {{"dim1_excluded", r.dim1_excluded ? 1.0 : 0.0}, {"dim2_excluded", r.dim2_excluded ? 1.0 : 0.0}};
  if (r.dominated_k > 0)
    nd.note = "orbit splitting of dimension " + std::to_string(r.dominated_dim) + " is dominated at k = " +
              std::to_string(r.dominated_k) + (cert ? "; excluded through the tangency" : "");
  if (!nd.pass)
    nd.witness = !r.dim1_excluded ? "a dominated splitting with dim E = 1 survives"
                                  : "a dominated splitting with dim E = 2 survives";
  rep.add(nd);
  return rep;
}

// ----- sink / source surgery ------------------------------------------------

namespace {

// rotation by theta in the plane of the orthonormal pair (u, v)
Matd plane_turn(const Vecd& u, const Vecd& v, double theta) {
  const int d = static_cast<int>(u.size());
  Matd uu = u * u.transpose() + v * v.transpose();
  Matd sk = v * u.transpose() - u * v.transpose();
  return Matd::Identity(d, d) + std::sin(theta) * sk + (std::cos(theta) - 1) * uu;
}

double log_radius(const ScaledMat<double>& p) { return std::log(detail::spectral_radius(p.m)) + p.log_scale; }

// largest theta with |e^{s + i theta} - 1| <= eps
double max_turn(double s, double eps) {
  double e = std::exp(s);
  double c = (1 + e * e - eps * eps) / (2 * e);
  if (c >= 1) return 0;
  return std::acos(std::max(-1.0, c));
}

struct Candidate {
  std::vector<Matd> perturb;
  double log_rho = kInf;
};

}  // namespace

SurgeryResult surgery_sink_source(const Cocycled& c, double eps, int K_max) {
  if (!(eps > 0)) throw std::invalid_argument("perturbation size must be positive");
  if (std::abs(log_jacobian_rate(c)) > 0.05)
    throw std::invalid_argument("surgery needs a log-Jacobian rate within 0.05 of zero");
  for (int k = 1; k <= K_max; ++k)
    if (auto s = find_dominated_splitting(c, k))
      throw DominationPresent("the orbit has a dominated splitting at k = " + std::to_string(k), *s, k);

  const int d = c.dim();
  const int m = c.period();
  const double eta = eps / 2;

  // turn planes: every pair of coordinate axes plus the pair of extreme
  // singular directions of the period product
  std::vector<std::pair<Vecd, Vecd>> planes;
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) planes.emplace_back(Vecd::Unit(d, a), Vecd::Unit(d, b));
  {
    Eigen::JacobiSVD<Matd> svd(product(c), Eigen::ComputeFullV);
    Matd V = svd.matrixV();
    planes.emplace_back(V.col(0), V.col(d - 1));
  }

  auto search = [&](double s, bool inverse) {
    Candidate best;
    const double tmax = 0.999 * max_turn(s, eps);
    const int steps = 24;
    for (const auto& [u, v] : planes)
      for (int whole = 0; whole < 2; ++whole)
        for (int k = -steps; k <= steps; ++k) {
          double th = tmax * k / steps;
          Matd P = std::exp(s) * plane_turn(u, v, th);
          std::vector<Matd> per(static_cast<std::size_t>(m), Matd::Identity(d, d));
          std::vector<Matd> mats;
          for (int i = 0; i < m; ++i) {
            if (i == 0 || whole)
              per[static_cast<std::size_t>(i)] = P;
            else
              per[static_cast<std::size_t>(i)] = std::exp(s) * Matd::Identity(d, d);
            mats.push_back(per[static_cast<std::size_t>(i)] * c.at(i));
          }
          Cocycled pc(mats);
          double lr = inverse ? log_radius(scaled_inverse_product(pc, 0, m)) : log_radius(scaled_product(pc, 0, m));
          if (lr < best.log_rho) {
            best.log_rho = lr;
            best.perturb = per;
          }
        }
    return best;
  };

  auto sink = search(-eta, false);
  if (!(sink.log_rho < 0))
    throw SurgeryFailure("no sink within the perturbation budget", std::exp(sink.log_rho));
  auto source = search(eta, true);
  if (!(source.log_rho < 0))
    throw SurgeryFailure("no source within the perturbation budget", std::exp(source.log_rho));

  SurgeryResult r;
  std::vector<Matd> a, b;
  for (int i = 0; i < m; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    a.push_back(sink.perturb[iu] * c.at(i));
    b.push_back(source.perturb[iu] * c.at(i));
    r.max_perturbation = std::max({r.max_perturbation, op_norm(sink.perturb[iu] - Matd::Identity(d, d)),
                                   op_norm(source.perturb[iu] - Matd::Identity(d, d))});
  }
  if (r.max_perturbation > eps * (1 + 1e-12)) throw std::logic_error("surgery perturbation exceeds its budget");
  r.sink = Cocycled(a);
  r.source = Cocycled(b);
  r.sink_radius = std::exp(sink.log_rho);
  r.source_inverse_radius = std::exp(source.log_rho);
  return r;
}

}  // namespace aperiodic
