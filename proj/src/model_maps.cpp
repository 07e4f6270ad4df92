#include "aperiodic/model_maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace aperiodic {

double smooth_drop(double v) {
  if (v <= 0) return 1.0;
  if (v >= 1) return 0.0;
  return 1.0 - v * v * (3.0 - 2.0 * v);
}

double smooth_drop_deriv(double v) {
  if (v <= 0 || v >= 1) return 0.0;
  return -6.0 * v * (1.0 - v);
}

void BumpProfile::validate() const {
  if (!(r_in > 0 && r_in < r_out && r_out <= 1.0))
    throw ModelError("bump radii must satisfy 0 < r_in < r_out <= 1");
}

double BumpProfile::phi(double r) const {
  return smooth_drop(std::log(r / r_in) / std::log(r_out / r_in));
}

double BumpProfile::dphi(double r) const {
  if (r <= r_in || r >= r_out) return 0.0;
  double L = std::log(r_out / r_in);
  return smooth_drop_deriv(std::log(r / r_in) / L) / (r * L);
}

double BumpProfile::max_slope() const {
  double best = 0;
  for (int i = 1; i < 4000; ++i) {
    double u = i / 4000.0;
    double r = r_in * std::pow(r_out / r_in, u);
    best = std::max(best, std::abs(dphi(r)));
  }
  return best;
}

void ConnectorParams::validate() const {
  if (!enabled) return;
  if (!(scale > 0)) throw ModelError("connector scale must be positive");
  if (!(rot_core > 0 && rot_core < rot_outer)) throw ModelError("rotation radii out of order");
  if (!(dip_core >= 0 && dip_core < dip_outer)) throw ModelError("dip radii out of order");
  if (!(depth_min <= depth && depth <= depth_max))
    throw ModelError("connector depth outside its declared range");
  // the dip is a graph shift; it stays injective while depth * |beta'| < 1
  if (depth_max * 1.5 / (dip_outer - dip_core) >= 1.0)
    throw ModelError("dip depth range breaks injectivity");
  double reach = scale * std::max(std::hypot(rot_cx, rot_cu) + rot_outer,
                                  std::hypot(dip_cx, dip_cu) + dip_outer);
  if (reach >= 1.0) throw ModelError("connector support leaves the chart");
}

SaddleModel::SaddleModel(Vecd log_rates, BumpProfile bump, ConnectorParams conn)
    : lambda_(std::move(log_rates)), bump_(bump), conn_(conn) {
  if (dim() != 2 && dim() != 3) throw ModelError("model dimension must be 2 or 3");
  bump_.validate();
  conn_.validate();
}

Matd SaddleModel::linear_part() const {
  return Matd(lambda_.array().exp().matrix().asDiagonal());
}

SaddleModel SaddleModel::with_depth(double depth) const {
  ConnectorParams c = conn_;
  c.depth = depth;
  return SaddleModel(lambda_, bump_, c);
}

SaddleModel SaddleModel::without_connector() const {
  ConnectorParams c = conn_;
  c.enabled = false;
  return SaddleModel(lambda_, bump_, c);
}

Vecd SaddleModel::eval_core(const Vecd& x) const {
  double r = x.norm();
  if (r >= bump_.r_out) return x;
  double f = bump_.phi(r);
  return ((f * lambda_).array().exp() * x.array()).matrix();
}

Matd SaddleModel::deriv_core(const Vecd& x) const {
  double r = x.norm();
  const int d = dim();
  if (r >= bump_.r_out) return Matd::Identity(d, d);
  Vecd e = (bump_.phi(r) * lambda_).array().exp();
  Matd J = Matd(e.asDiagonal());
  double dp = bump_.dphi(r);
  if (dp != 0.0) {
    Vecd w = (e.array() * lambda_.array() * x.array()).matrix();
    J += dp * w * (x / r).transpose();
  }
  return J;
}

Vecd SaddleModel::inverse_core(const Vecd& y) const {
  double ry = y.norm();
  if (ry >= bump_.r_out || ry == 0.0) return y;
  Vecd lin = ((-lambda_).array().exp() * y.array()).matrix();
  if (lin.norm() <= bump_.r_in) return lin;
  // |exp(-phi(rho) Lambda) y| = rho has a single root in (0, r_out)
  auto g = [&](double rho) {
    return ((-bump_.phi(rho) * lambda_).array().exp() * y.array()).matrix().norm() - rho;
  };
  double lo = 0.0, hi = bump_.r_out;
  for (int it = 0; it < 200 && hi - lo > 1e-300; ++it) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) > 0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 4e-17 * hi) break;
  }
  double rho = 0.5 * (lo + hi);
  Vecd x = ((-bump_.phi(rho) * lambda_).array().exp() * y.array()).matrix();
  for (int it = 0; it < 3; ++it) x -= deriv_core(x).lu().solve(eval_core(x) - y);
  return x;
}

Vecd SaddleModel::rotation_center() const {
  Vecd c = Vecd::Zero(dim());
  c(0) = conn_.scale * conn_.rot_cx;
  c(dim() - 1) = conn_.scale * conn_.rot_cu;
  return c;
}

Vecd SaddleModel::dip_center() const {
  Vecd c = Vecd::Zero(dim());
  c(0) = conn_.scale * conn_.dip_cx;
  c(dim() - 1) = conn_.scale * conn_.dip_cu;
  return c;
}

bool SaddleModel::in_connector_support(const Vecd& x) const {
  if (!conn_.enabled) return false;
  return (x - rotation_center()).norm() < conn_.scale * conn_.rot_outer ||
         (x - dip_center()).norm() < conn_.scale * conn_.dip_outer;
}

Vecd SaddleModel::rot_eval(const Vecd& p, Matd* jac) const {
  const int d = dim(), a = 0, b = dim() - 1;
  const double core = conn_.scale * conn_.rot_core, outer = conn_.scale * conn_.rot_outer;
  Vecd q = p - rotation_center();
  double r = q.norm();
  if (r >= outer) {
    if (jac) *jac = Matd::Identity(d, d);
    return p;
  }
  double v = (r - core) / (outer - core);
  double th = conn_.rot_angle * smooth_drop(v);
  double c = std::cos(th), s = std::sin(th);
  Vecd out = q;
  out(a) = c * q(a) - s * q(b);
  out(b) = s * q(a) + c * q(b);
  if (jac) {
    Matd J = Matd::Identity(d, d);
    J(a, a) = c;
    J(a, b) = -s;
    J(b, a) = s;
    J(b, b) = c;
    double dth = conn_.rot_angle * smooth_drop_deriv(v) / (outer - core);
    if (dth != 0.0 && r > 0) {
      Vecd dq = Vecd::Zero(d);
      dq(a) = -s * q(a) - c * q(b);
      dq(b) = c * q(a) - s * q(b);
      J += dth * dq * (q / r).transpose();
    }
    *jac = J;
  }
  return out + rotation_center();
}

Vecd SaddleModel::rot_inverse(const Vecd& p) const {
  const int a = 0, b = dim() - 1;
  const double core = conn_.scale * conn_.rot_core, outer = conn_.scale * conn_.rot_outer;
  Vecd q = p - rotation_center();
  double r = q.norm();  // the twist keeps distances to the centre
  if (r >= outer) return p;
  double th = -conn_.rot_angle * smooth_drop((r - core) / (outer - core));
  double c = std::cos(th), s = std::sin(th);
  Vecd out = q;
  out(a) = c * q(a) - s * q(b);
  out(b) = s * q(a) + c * q(b);
  return out + rotation_center();
}

Vecd SaddleModel::dip_eval(const Vecd& p, Matd* jac) const {
  const int d = dim(), b = 0;
  const double core = conn_.scale * conn_.dip_core, outer = conn_.scale * conn_.dip_outer;
  const double h = conn_.scale * conn_.depth;
  Vecd q = p - dip_center();
  double r = q.norm();
  if (jac) *jac = Matd::Identity(d, d);
  if (r >= outer) return p;
  double v = (r - core) / (outer - core);
  Vecd out = p;
  out(b) -= h * smooth_drop(v);
  if (jac && r > 0) {
    double db = smooth_drop_deriv(v) / (outer - core);
    jac->row(b) -= h * db * (q / r).transpose();
  }
  return out;
}

Vecd SaddleModel::dip_inverse(const Vecd& y) const {
  const int b = 0;
  const double core = conn_.scale * conn_.dip_core, outer = conn_.scale * conn_.dip_outer;
  const double h = conn_.scale * conn_.depth;
  if ((y - dip_center()).norm() >= outer + h) return y;
  // preimage is y + t e_0 with t = h * beta(|y + t e_0 - c|), monotone in t
  auto k = [&](double t) {
    Vecd p = y;
    p(b) += t;
    return t - h * smooth_drop(((p - dip_center()).norm() - core) / (outer - core));
  };
  double lo = 0.0, hi = h;
  if (k(lo) >= 0) return y;
  for (int it = 0; it < 200 && hi - lo > 0; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (k(mid) < 0)
      lo = mid;
    else
      hi = mid;
  }
  Vecd p = y;
  p(b) += 0.5 * (lo + hi);
  return p;
}

Vecd SaddleModel::eval(const Vecd& x) const {
  Vecd y = eval_core(x);
  if (!conn_.enabled) return y;
  return rot_eval(dip_eval(y, nullptr), nullptr);
}

Matd SaddleModel::deriv(const Vecd& x) const {
  Matd J = deriv_core(x);
  if (!conn_.enabled) return J;
  Vecd y = eval_core(x);
  Matd Jr, Jd;
  Vecd z = dip_eval(y, &Jd);
  rot_eval(z, &Jr);
  return Jr * Jd * J;
}

Vecd SaddleModel::inverse(const Vecd& y) const {
  if (!conn_.enabled) return inverse_core(y);
  return inverse_core(dip_inverse(rot_inverse(y)));
}

SaddleModel make_model_3d(bool with_connector) {
  Vecd rates(3);
  rates << -1.6, -1.6, 3.2;
  ConnectorParams c;
  c.enabled = with_connector;
  return SaddleModel(rates, BumpProfile{}, c);
}

SaddleModel make_model_2d(bool with_connector, double lambda) {
  Vecd rates(2);
  rates << -lambda, lambda;
  ConnectorParams c;
  c.enabled = with_connector;
  return SaddleModel(rates, BumpProfile{}, c);
}

// ---------------------------------------------------------------- budget

double log_inv_norm(const Matd& a) {
  Matd g = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Matd> es;
  es.computeDirect(g, Eigen::EigenvaluesOnly);
  double smin2 = es.eigenvalues()(0);
  if (!(smin2 > 1e-12 * es.eigenvalues()(g.rows() - 1))) {
    Eigen::JacobiSVD<Matd> svd(a);
    return -std::log(svd.singularValues()(a.rows() - 1));
  }
  return -0.5 * std::log(smin2);
}

namespace {

std::vector<Vecd> sphere_directions(int d, int count) {
  std::vector<Vecd> dirs;
  if (d == 2) {
    for (int i = 0; i < count; ++i) {
      double t = 2 * std::numbers::pi * i / count;
      Vecd v(2);
      v << std::cos(t), std::sin(t);
      dirs.push_back(v);
    }
  } else {
    // Fibonacci sphere plus the coordinate axes
    const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / count;
      double r = std::sqrt(1 - z * z);
      Vecd v(3);
      v << r * std::cos(ga * i), r * std::sin(ga * i), z;
      dirs.push_back(v);
    }
    for (int k = 0; k < 3; ++k)
      for (int s : {-1, 1}) {
        Vecd v = Vecd::Zero(3);
        v(k) = s;
        dirs.push_back(v);
      }
  }
  return dirs;
}

}  // namespace

BudgetReport verify_budget(const SaddleModel& m, const BudgetGrid& grid) {
  if (!(grid.pitch > 0 && grid.pitch <= 0.01))
    throw std::invalid_argument("budget grid pitch must be in (0, 0.01]");
  const int d = m.dim();
  BudgetReport rep;
  rep.max_log_det = -std::numeric_limits<double>::infinity();
  rep.max_log_inv_norm = -std::numeric_limits<double>::infinity();
  rep.connector_max_log_det = rep.connector_max_log_inv_norm =
      -std::numeric_limits<double>::infinity();

  auto visit = [&](const Vecd& x) {
    Matd J = m.deriv(x);
    double ld = std::log(std::abs(J.determinant()));
    double li = log_inv_norm(J);
    if (grid.exclude_connector && m.in_connector_support(m.eval_core(x))) {
      ++rep.connector_samples;
      rep.connector_max_log_det = std::max(rep.connector_max_log_det, ld);
      rep.connector_max_log_inv_norm = std::max(rep.connector_max_log_inv_norm, li);
      return;
    }
    ++rep.samples;
    if (ld > rep.max_log_det) {
      rep.max_log_det = ld;
      rep.argmax_log_det = x;
    }
    if (li > rep.max_log_inv_norm) {
      rep.max_log_inv_norm = li;
      rep.argmax_log_inv_norm = x;
    }
    if ((ld >= 1.0 || li >= 2.0) && static_cast<int>(rep.failures.size()) < grid.max_failures)
      rep.failures.push_back({x, ld, li});
  };

  const long long n = static_cast<long long>(std::floor(grid.radius / grid.pitch));
  Vecd x(d);
  if (d == 2) {
    for (long long i = -n; i <= n; ++i)
      for (long long j = -n; j <= n; ++j) {
        x << i * grid.pitch, j * grid.pitch;
        if (x.norm() <= grid.radius) visit(x);
      }
  } else {
    for (long long i = -n; i <= n; ++i)
      for (long long j = -n; j <= n; ++j)
        for (long long k = -n; k <= n; ++k) {
          x << i * grid.pitch, j * grid.pitch, k * grid.pitch;
          if (x.norm() <= grid.radius) visit(x);
        }
  }
  // the lattice is coarse near the origin, where the bump varies on log scales
  auto dirs = sphere_directions(d, grid.directions);
  const double r_lo = 1e-4, r_hi = 2 * grid.pitch;
  for (int s = 0; s < grid.shells; ++s) {
    double r = r_lo * std::pow(r_hi / r_lo, s / double(grid.shells - 1));
    for (const auto& v : dirs) visit(Vecd(r * v));
  }

  rep.margin_jacobian = 1.0 - rep.max_log_det;
  rep.margin_inverse = 2.0 - rep.max_log_inv_norm;
  rep.pass = rep.failures.empty() && rep.max_log_det < 1.0 && rep.max_log_inv_norm < 2.0;
  return rep;
}

// ---------------------------------------------------------------- tangency

namespace {

struct StableCoord {
  bool defined = false;
  double value = 0;
  Vecd grad;
  int k = 0;
};

// Offset from the stable hyperplane {x_last = 0}, read off at the first entry
// into a ball around the fixed point that misses the connector supports.  In
// that ball the hyperplane is invariant and every other point drifts away
// from it, so it is exactly the local stable manifold there.
// Local stable patch: B = {|x_s| < a, |u| < b}.  The stable slab |x_s| < a
// misses every connector support, so its points with u = 0 flow straight into
// the fixed point and W^s meets B exactly in {u = 0}.
struct StableBox {
  double a, b;
};

StableBox stable_box(const SaddleModel& m) {
  const int d = m.dim();
  double a = 0.5 * m.bump().r_out;
  const auto& c = m.connector();
  if (c.enabled) {
    auto clip = [&](const Vecd& centre, double radius) {
      double cu = centre(d - 1);
      if (radius <= std::abs(cu)) return;
      a = std::min(a, centre.head(d - 1).norm() - std::sqrt(radius * radius - cu * cu));
    };
    clip(m.rotation_center(), c.scale * c.rot_outer);
    clip(m.dip_center(), c.scale * c.dip_outer);
  }
  return {std::max(a, m.bump().r_in), 0.5 * m.bump().r_out};
}

StableCoord stable_coordinate(const SaddleModel& m, Vecd p, int horizon, const StableBox& box) {
  const int d = m.dim(), b = d - 1;
  Matd J = Matd::Identity(d, d);
  StableCoord sc;
  for (int k = 0; k <= horizon; ++k) {
    if (p.head(b).norm() < box.a && std::abs(p(b)) < box.b) {
      sc.defined = true;
      sc.value = p(b);
      sc.grad = J.row(b).transpose();
      sc.k = k;
      return sc;
    }
    if (p.norm() >= m.bump().r_out) return sc;  // fixed from here on
    J = m.deriv(p) * J;
    p = m.eval(p);
  }
  return sc;
}

struct CurvePoint {
  double s;
  Vecd x;
  Vecd tangent;
  StableCoord sc;
  int passes;  // steps of the orbit that went through the connector
  bool usable(int max_passes) const { return sc.defined && passes <= max_passes; }
  double slope() const { return sc.grad.dot(tangent); }
};

CurvePoint unstable_point(const SaddleModel& m, int n, double s, int horizon, const StableBox& rq) {
  const int d = m.dim();
  Vecd x = Vecd::Zero(d);
  x(d - 1) = s;
  Vecd t = Vecd::Zero(d);
  t(d - 1) = 1.0;
  int passes = 0;
  for (int j = 0; j < n; ++j) {
    if (m.in_connector_support(m.eval_core(x))) ++passes;
    t = m.deriv(x) * t;
    x = m.eval(x);
  }
  return {s, x, t, stable_coordinate(m, x, horizon, rq), passes};
}

double crossing_angle(const CurvePoint& c) {
  double num = std::abs(c.sc.grad.dot(c.tangent));
  return std::asin(std::min(1.0, num / (c.sc.grad.norm() * c.tangent.norm())));
}

struct Fold {
  int n;
  CurvePoint at;
  double s_lo, s_hi;  // bracket in which it was found
};

struct Scan {
  std::vector<Fold> folds;
  std::vector<double> cross_angles;
};

// sample W^u_n adaptively on the fundamental domain and locate folds and crossings
Scan scan_unstable(const SaddleModel& m, int n, const LocatorOptions& opt, double s0 = 0,
                   double s1 = 0, int initial = 0) {
  const int d = m.dim();
  const double chi = m.log_rates()(d - 1);
  if (s0 <= 0) {
    s0 = 0.1 * m.bump().r_in;
    s1 = s0 * std::exp(chi);
  }
  if (initial <= 0) initial = opt.initial_samples;
  const StableBox rq = stable_box(m);
  std::vector<CurvePoint> pts;
  for (int i = 0; i <= initial; ++i)
    pts.push_back(unstable_point(m, n, s0 * std::pow(s1 / s0, i / double(initial)),
                                 opt.stable_horizon, rq));

  for (int pass = 0; pass < 40; ++pass) {
    std::vector<CurvePoint> next;
    bool refined = false;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      next.push_back(pts[i]);
      const auto& a = pts[i];
      const auto& c = pts[i + 1];
      double seg = (c.x - a.x).norm();
      double cosang = a.tangent.dot(c.tangent) / (a.tangent.norm() * c.tangent.norm());
      double turn = std::acos(std::clamp(cosang, -1.0, 1.0));
      if ((seg > opt.max_segment || turn > opt.max_turn) && c.s - a.s > 1e-14 * c.s &&
          static_cast<long long>(pts.size() + next.size()) < opt.max_curve_samples) {
        next.push_back(unstable_point(m, n, 0.5 * (a.s + c.s), opt.stable_horizon, rq));
        refined = true;
      }
    }
    next.push_back(pts.back());
    pts.swap(next);
    if (!refined) break;
  }

  Scan out;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    CurvePoint a = pts[i], c = pts[i + 1];
    const double lo = a.s, hi = c.s;
    const int mp = opt.max_connector_passes;
    if (!a.usable(mp) || !c.usable(mp) || a.sc.k != c.sc.k || a.passes != c.passes) continue;
    if ((a.slope() > 0) != (c.slope() > 0)) {
      bool ok = true;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a.s + c.s);
        if (mid == a.s || mid == c.s) break;
        CurvePoint p = unstable_point(m, n, mid, opt.stable_horizon, rq);
        if (!p.usable(mp) || p.sc.k != a.sc.k || p.passes != a.passes) {
          ok = false;
          break;
        }
        if ((p.slope() > 0) == (a.slope() > 0))
          a = p;
        else
          c = p;
      }
      if (ok) out.folds.push_back({n, std::abs(a.slope()) < std::abs(c.slope()) ? a : c, lo, hi});
    }
    a = pts[i];
    c = pts[i + 1];
    if ((a.sc.value > 0) != (c.sc.value > 0)) {
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (a.s + c.s);
        if (mid == a.s || mid == c.s) break;
        CurvePoint p = unstable_point(m, n, mid, opt.stable_horizon, rq);
        if (!p.usable(mp) || p.sc.k != a.sc.k || p.passes != a.passes) break;
        if ((p.sc.value > 0) == (a.sc.value > 0))
          a = p;
        else
          c = p;
      }
      out.cross_angles.push_back(crossing_angle(a));
    }
  }
  return out;
}

Scan scan_all(const SaddleModel& m, const LocatorOptions& opt) {
  Scan all;
  for (int n = 1; n <= opt.unstable_iterates; ++n) {
    Scan s = scan_unstable(m, n, opt);
    all.folds.insert(all.folds.end(), s.folds.begin(), s.folds.end());
    all.cross_angles.insert(all.cross_angles.end(), s.cross_angles.begin(), s.cross_angles.end());
  }
  return all;
}

LandscapeEntry landscape_of(double depth, const Scan& s) {
  LandscapeEntry e{depth, {}, s.cross_angles};
  for (const auto& f : s.folds) e.fold_values.push_back(f.at.sc.value);
  return e;
}

// Newton on (curve parameter, depth) for sigma = 0 and zero slope, on one
// branch of W^u_n with a fixed stable entry time and connector pass count
std::optional<std::pair<Fold, double>> solve_tangency(const SaddleModel& m, const Fold& seed,
                                                      double h, const LocatorOptions& opt) {
  const auto& cp = m.connector();
  const StableBox box = stable_box(m);
  const int n = seed.n, k0 = seed.at.sc.k, p0 = seed.at.passes;
  auto at = [&](double s, double hh) -> std::optional<CurvePoint> {
    if (!(s > 0) || hh < cp.depth_min || hh > cp.depth_max) return std::nullopt;
    CurvePoint c = unstable_point(m.with_depth(hh), n, s, opt.stable_horizon, box);
    if (!c.sc.defined || c.sc.k != k0 || c.passes != p0) return std::nullopt;
    return c;
  };
  double s = seed.at.s;
  auto cur = at(s, h);
  if (!cur) return std::nullopt;
  const double span = cp.depth_max - cp.depth_min;
  for (int it = 0; it < 40; ++it) {
    double f1 = cur->sc.value, f2 = cur->slope();
    if (std::abs(f1) <= 1e-14 && crossing_angle(*cur) <= 1e-9) break;
    const double ds = 1e-7 * s;
    double dh = 1e-7 * span;
    auto ps = at(s + ds, h);
    auto ph = at(s, h + dh);
    if (!ph) {
      dh = -dh;
      ph = at(s, h + dh);
    }
    if (!ps || !ph) return std::nullopt;
    Eigen::Matrix2d J;
    J << (ps->sc.value - f1) / ds, (ph->sc.value - f1) / dh,  //
        (ps->slope() - f2) / ds, (ph->slope() - f2) / dh;
    Eigen::Vector2d step = J.fullPivLu().solve(Eigen::Vector2d(-f1, -f2));
    if (!step.allFinite()) return std::nullopt;
    // damping keeps the iterate on the branch
    double lim = std::max(std::abs(step(0)) / (0.05 * s), std::abs(step(1)) / (0.1 * span));
    if (lim > 1) step /= lim;
    std::optional<CurvePoint> next;
    for (int half = 0; half < 20; ++half) {
      next = at(s + step(0), h + step(1));
      if (next) break;
      step *= 0.5;
    }
    if (!next) return std::nullopt;
    s = next->s;
    h += step(1);
    cur = next;
  }
  if (!(std::abs(cur->sc.value) <= 1e-12 && crossing_angle(*cur) <= 1e-6)) return std::nullopt;
  return std::make_pair(Fold{n, *cur, seed.s_lo, seed.s_hi}, h);
}

TangencyCertificate certificate_from(const Fold& f, double depth) {
  TangencyCertificate c;
  c.z = f.at.x;
  c.direction = f.at.tangent / f.at.tangent.norm();
  c.angle_residual = crossing_angle(f.at);
  c.offset_residual = std::abs(f.at.sc.value);
  c.depth = depth;
  c.unstable_iterate = f.n;
  c.stable_entry = f.at.sc.k;
  return c;
}

}  // namespace

TangencyCertificate tangency_locator(const SaddleModel& m, const LocatorOptions& opt) {
  const int d = m.dim();
  for (int i = 0; i + 1 < d; ++i)
    if (!(m.log_rates()(i) < 0)) throw ModelError("locator expects contracting leading rates");
  if (!(m.log_rates()(d - 1) > 0)) throw ModelError("locator expects an expanding last rate");

  std::vector<LandscapeEntry> land;
  auto min_angle = [&]() {
    double a = std::numeric_limits<double>::infinity();
    for (const auto& e : land)
      for (double v : e.cross_angles) a = std::min(a, v);
    return a;
  };

  const auto& cp = m.connector();
  if (!cp.enabled) {
    Scan s = scan_all(m, opt);
    land.push_back(landscape_of(0.0, s));
    for (const auto& f : s.folds)
      if (std::abs(f.at.sc.value) <= 1e-12 && crossing_angle(f.at) <= 1e-6)
        return certificate_from(f, 0.0);
    throw TangencySearchFailure("no tangency: the unstable curve never folds onto W^s", land,
                                min_angle());
  }

  const int P = std::max(2, opt.depth_samples);
  std::vector<double> hs;
  std::vector<Scan> scans;
  for (int j = 0; j < P; ++j) {
    double h = j + 1 == P ? cp.depth_max
                          : cp.depth_min + (cp.depth_max - cp.depth_min) * j / double(P - 1);
    hs.push_back(h);
    scans.push_back(scan_all(m.with_depth(h), opt));
    land.push_back(landscape_of(h, scans.back()));
  }

  // seeds: every fold of W^u, earliest iterate first, then by how close the
  // fold already is to W^s; the first seed that converges is reported
  struct Seed {
    const Fold* f;
    double h;
  };
  std::vector<Seed> seeds;
  for (int j = 0; j < P; ++j)
    for (const auto& f : scans[j].folds) seeds.push_back({&f, hs[j]});
  std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) {
    if (a.f->n != b.f->n) return a.f->n < b.f->n;
    return std::abs(a.f->at.sc.value) < std::abs(b.f->at.sc.value);
  });
  for (const auto& sd : seeds) {
    auto r = solve_tangency(m, *sd.f, sd.h, opt);
    if (r) return certificate_from(r->first, r->second);
  }
  throw TangencySearchFailure("no tangency of W^u with W^s over the depth range", land,
                              min_angle());
}

NoDominationReport no_domination_certificate(const SaddleModel& m,
                                              const std::optional<TangencyCertificate>& cert,
                                              int K_max) {
  if (m.dim() != 3) throw ModelError("no-domination certificate is for the 3D model");
  NoDominationReport rep;
  // derivative at the fixed point restricted to the stable plane
  Matd A = m.deriv(Vecd::Zero(3));
  Matd Es = A.topLeftCorner(2, 2);
  Cocycled plane({Es});
  rep.max_k_tested = K_max;
  rep.dim1_excluded = true;
  // coordinate lines and a skew pair, plus every spectral splitting
  std::vector<std::pair<Vecd, Vecd>> pairs;
  Vecd e1(2), e2(2), u(2), w(2);
  e1 << 1, 0;
  e2 << 0, 1;
  u << 1, 1;
  w << 1, -2;
  pairs.push_back({e1, e2});
  pairs.push_back({e2, e1});
  pairs.push_back({u.normalized(), w.normalized()});
  for (int k = 1; k <= K_max && rep.dim1_excluded; ++k) {
    bool dominated = find_dominated_splitting(plane, k).has_value();
    for (const auto& [a, b] : pairs) {
      SplittingCandidate<double> s{{Basis<double>(a)}, {Basis<double>(b)}};
      try {
        if (is_k_dominated(plane, s, k)) dominated = true;
      } catch (const NonInvariantSplitting&) {
        // a line pair that is not invariant is no candidate
      }
    }
    if (dominated) {
      rep.dim1_excluded = false;
      rep.first_dominated_k = k;
    }
  }
  rep.dim2_excluded = cert.has_value() && cert->angle_residual <= 1e-6;
  rep.complete = rep.dim1_excluded && rep.dim2_excluded;
  if (!cert) rep.note = "no tangency certificate: partial report";
  return rep;
}

}  // namespace aperiodic
