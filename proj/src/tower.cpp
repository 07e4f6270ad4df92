#include "aperiodic/tower.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace aperiodic {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

std::int64_t wrap_index(std::int64_t i, std::int64_t m) { return ((i % m) + m) % m; }

Vecd first_axis(int d) {
  Vecd e = Vecd::Zero(d);
  e(0) = 1;
  return e;
}

// generator of plane_rotation: d/da R(a) = R(a) G
Matd plane_generator(int d) {
  Matd g = Matd::Zero(d, d);
  g(0, 1) = -1;
  g(1, 0) = 1;
  return g;
}

void fill_disks(TowerStage& s, const TowerLayout& L) {
  const std::int64_t m = s.period;
  s.attracting = {CycleRole::attracting, {}};
  s.repelling = {CycleRole::repelling, {}};
  for (std::int64_t i = 0; i < m; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    s.attracting.disks.push_back({s.centers[ui], L.attract_radius() * s.support, s.frames[ui]});
  }
  // the inverse map moves E_i into E_{i+1}, so E_i sits at the centre that
  // the forward map reaches i steps before returning to centre 0
  for (std::int64_t i = 0; i < m; ++i) {
    const auto h = static_cast<std::size_t>(wrap_index(-i, m));
    s.repelling.disks.push_back({s.centers[h], L.repel_radius() * s.support, s.frames[h]});
  }
}

void fill_certificate(Tower& t, int level) {
  RealizedMap f(t);
  TowerStage& s = t.stages.at(static_cast<std::size_t>(level - 1));
  std::vector<Matd> mats;
  for (std::int64_t j = 0; j < s.period; ++j) mats.push_back(f.deriv(s.centers[static_cast<std::size_t>(j)]));
  s.cert.location = s.centers.front();
  s.cert.period = s.period;
  s.cert.cocycle = Cocycled(std::move(mats));
  s.cert.spectrum = exponents_periodic(s.cert.cocycle);
}

// the full-resolution budget scan of a core map takes seconds in 3D, and
// every tower built from the same rates and bump shares it
const BudgetReport& core_budget(const SaddleModel& m) {
  static std::mutex mu;
  static std::map<std::vector<double>, BudgetReport> cache;
  std::vector<double> key(m.log_rates().data(), m.log_rates().data() + m.log_rates().size());
  key.push_back(m.bump().r_in);
  key.push_back(m.bump().r_out);
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, verify_budget(m.without_connector())).first;
  return it->second;
}

double child_bound(const TowerLayout& L, int b, bool paired) {
  const double slot = std::numbers::pi / (paired ? 2.0 * b : double(b));
  return std::min(L.child_cap, 0.8 * L.ring * std::sin(slot));
}

Tower add_stage(const Tower& t, int b, double delta, std::int64_t m0, double offset, bool paired) {
  if (t.stages.empty()) throw TowerError("refine needs a seeded tower");
  if (b < 2) throw TowerError("branching factor must be at least 2 so that periods grow");
  const TowerStage& cur = t.stages.back();
  if (cur.branching != 0) throw TowerError("stage already refined");
  if (b * cur.period <= m0)
    throw TowerError("period " + std::to_string(b * cur.period) + " does not exceed m0 = " +
                     std::to_string(m0));
  if (!(delta > 0)) throw TowerError("delta must be positive");
  const double twist = twist_log_inv_norm(t.layout, b);
  if (!(twist < 2))
    throw TowerError("derivative budget: carry twist for b = " + std::to_string(b) +
                     " needs log||Df^-1|| = " + std::to_string(twist));

  const TowerLayout& L = t.layout;
  const double cap = child_bound(L, b, paired);
  const double want = 0.9 * delta / (2 * L.attract_radius() * cur.support);
  const double kappa = std::min(cap, want);
  const double support = kappa * cur.support;
  if (support < kSupportFloor)
    throw TowerError("delta = " + std::to_string(delta) +
                     " is below the feasible disk size; needs delta >= " +
                     std::to_string(kSupportFloor * 2 * L.attract_radius() / 0.9));

  Tower out = t;
  TowerStage& parent = out.stages.back();
  parent.branching = b;
  parent.child_scale = kappa;
  parent.child_offset = offset;

  TowerStage next;
  next.level = cur.level + 1;
  next.period = b * cur.period;
  next.support = support;
  const int d = t.dim;
  for (std::int64_t j = 0; j < next.period; ++j) {
    const auto i = static_cast<std::size_t>(j % cur.period);
    const std::int64_t k = j / cur.period;
    Matd r = plane_rotation(d, offset + kTwoPi * double(k) / b);
    next.centers.push_back(cur.centers[i] + cur.support * L.ring * (cur.frames[i] * r * first_axis(d)));
    next.frames.push_back(cur.frames[i] * r);
  }
  fill_disks(next, L);
  out.stages.push_back(std::move(next));
  fill_certificate(out, out.depth());
  return out;
}

}  // namespace

void TowerLayout::validate() const {
  const bool ordered = 0 < insert && insert < twist_in0 && twist_in0 < twist_in1 &&
                       twist_in1 <= ring - child_cap && ring + child_cap <= twist_out0 &&
                       twist_out0 < twist_out1 && twist_out1 < shell0 && shell0 < 1;
  if (!ordered) throw TowerError("tower layout radii are not nested");
  if (!(0 < repel_u && repel_u < 0.5 && 0.5 < attract_u && attract_u < 1))
    throw TowerError("repelling radius must sit in the expanding half of the shell");
  if (!(shell_eps > 0 && stage1_circle > 0)) throw TowerError("layout scales must be positive");
}

Matd plane_rotation(int dim, double a) {
  Matd r = Matd::Identity(dim, dim);
  const double c = std::cos(a), s = std::sin(a);
  r(0, 0) = c;
  r(0, 1) = -s;
  r(1, 0) = s;
  r(1, 1) = c;
  return r;
}

double twist_log_inv_norm(const TowerLayout& L, int b) {
  // y -> R(theta(|y|)) y has singular values of [[1, k], [0, 1]] with
  // k = rho theta'; smoothstep in log radius peaks at slope 3/2
  const double theta = kTwoPi / b;
  const double k = theta * 1.5 /
                   std::min(std::log(L.twist_in1 / L.twist_in0), std::log(L.twist_out1 / L.twist_out0));
  return std::log(0.5 * (k + std::sqrt(k * k + 4)));
}

Tower seed_stage(const SaddleModel& m, std::int64_t m1, double delta1, TowerLayout layout) {
  layout.validate();
  if (m1 < 2) throw TowerError("m_1 must be at least 2");
  if (!(delta1 > 0)) throw TowerError("delta_1 must be positive");
  const int d = m.dim();
  const BudgetReport& rep = core_budget(m);
  if (!rep.pass)
    throw TowerError("model fails the derivative budget: max log|det| = " +
                     std::to_string(rep.max_log_det) +
                     ", max log||Df^-1|| = " + std::to_string(rep.max_log_inv_norm));

  const double rD = layout.attract_radius();
  const double ring_room = 0.8 * layout.stage1_circle * std::sin(std::numbers::pi / double(m1));
  const double support = std::min(0.9 * delta1 / (2 * rD), ring_room);
  if (support < kSupportFloor)
    throw TowerError("delta_1 = " + std::to_string(delta1) +
                     " is below the feasible disk size; needs delta_1 >= " +
                     std::to_string(kSupportFloor * 2 * rD / 0.9));

  Tower t;
  t.dim = d;
  t.insert_rates = m.log_rates();
  t.bump = m.bump();
  t.layout = layout;
  TowerStage s;
  s.level = 1;
  s.period = m1;
  s.support = support;
  for (std::int64_t i = 0; i < m1; ++i) {
    Matd r = plane_rotation(d, kTwoPi * double(i) / double(m1));
    s.centers.push_back(layout.stage1_circle * (r * first_axis(d)));
    s.frames.push_back(r);
  }
  fill_disks(s, layout);
  t.stages.push_back(std::move(s));
  fill_certificate(t, 1);
  return t;
}

Tower refine(const Tower& t, int b, double delta, std::int64_t m0) {
  return add_stage(t, b, delta, m0, 0.0, false);
}

std::pair<Tower, Tower> refine_pair(const Tower& t, int b, double delta, std::int64_t m0) {
  if (b < 2) throw TowerError("branching factor must be at least 2 so that periods grow");
  if (child_bound(t.layout, b, true) * t.stages.back().support < kSupportFloor)
    throw TowerError("no room for two child families: packing bound " +
                     std::to_string(child_bound(t.layout, b, true)));
  Tower a = add_stage(t, b, delta, m0, 0.0, true);
  Tower c = add_stage(t, b, delta, m0, std::numbers::pi / b, true);
  a.word += '0';
  c.word += '1';
  return {std::move(a), std::move(c)};
}

std::vector<Tower> branch_forest(const Tower& seed, int word_depth, int b, double delta_ratio,
                                 std::int64_t m0) {
  if (word_depth < 0) throw TowerError("word depth must be non-negative");
  std::vector<Tower> level{seed};
  for (int w = 0; w < word_depth; ++w) {
    std::vector<Tower> next;
    for (const auto& t : level) {
      auto [a, c] = refine_pair(t, b, delta_ratio * max_diameter(t.stages.back()), m0);
      next.push_back(std::move(a));
      next.push_back(std::move(c));
    }
    level.swap(next);
  }
  return level;
}

Tower build_tower(const BuildConfig& cfg) {
  if (cfg.dim != 2 && cfg.dim != 3) throw TowerError("dimension must be 2 or 3");
  if (cfg.depth < 1) throw TowerError("depth must be at least 1");
  if (cfg.branching.empty()) throw TowerError("branching list is empty");
  if (!(cfg.delta_ratio > 0 && cfg.delta_ratio < 1))
    throw TowerError("delta ratio must lie in (0, 1) so the schedule decreases");
  SaddleModel m = cfg.dim == 3 ? make_model_3d(false) : make_model_2d(false);
  Tower t = seed_stage(m, cfg.m1, cfg.delta1);
  for (int n = 1; n < cfg.depth; ++n) {
    int b = cfg.branching[std::min<std::size_t>(static_cast<std::size_t>(n - 1), cfg.branching.size() - 1)];
    t = refine(t, b, cfg.delta_ratio * max_diameter(t.stages.back()), cfg.m0);
  }
  return t;
}

TowerSchedule conjugacy_from_tower(const Tower& t) {
  std::vector<std::int64_t> p;
  for (const auto& s : t.stages) p.push_back(s.period);
  TowerSchedule sched(std::move(p));
  RealizedMap f(t);
  const int d = t.dim;
  for (const auto& s : t.stages) {
    const auto& D = s.attracting.disks;
    const auto m = static_cast<std::int64_t>(D.size());
    if (m != s.period) throw TowerError("stage " + std::to_string(s.level) + " disk count differs from its period");
    for (std::int64_t i = 0; i < m; ++i) {
      const Disk& a = D[static_cast<std::size_t>(i)];
      const Disk& b = D[static_cast<std::size_t>((i + 1) % m)];
      auto bad = [&] {
        return NestingViolation("f(D_" + std::to_string(s.level) + "," + std::to_string(i) + ") is not inside D_" +
                                    std::to_string(s.level) + "," + std::to_string((i + 1) % m),
                                s.level, i, (i + 1) % m);
      };
      for (int k = 0; k < 2 * d; ++k) {
        Vecd x = a.center + (k % 2 ? -1.0 : 1.0) * a.radius * a.frame.col(k / 2);
        try {
          if ((f.eval(x) - b.center).norm() >= b.radius) throw bad();
        } catch (const DomainError&) {
          throw bad();
        }
      }
    }
    if (s.level == 1) continue;
    const auto& up = t.stage(s.level - 1);
    for (std::int64_t j = 0; j < m; ++j) {
      const Disk& a = D[static_cast<std::size_t>(j)];
      const Disk& h = up.attracting.disks[static_cast<std::size_t>(j % up.period)];
      if ((a.center - h.center).norm() + a.radius >= h.radius)
        throw NestingViolation("D_" + std::to_string(s.level) + "," + std::to_string(j) + " is not inside D_" +
                                   std::to_string(s.level - 1) + "," + std::to_string(j % up.period),
                               s.level, j, j % up.period);
    }
  }
  return sched;
}

// ---------------------------------------------------------------------------

RealizedMap::RealizedMap(const Tower& t)
    : t_(&t), insert_(t.insert_rates, t.bump, ConnectorParams{}) {
  if (t.stages.empty()) throw TowerError("realized map needs at least one stage");
}

int RealizedMap::top_disk(const Vecd& x) const {
  const TowerStage& s = t_->stages.front();
  for (std::size_t i = 0; i < s.centers.size(); ++i)
    if ((x - s.centers[i]).norm() < s.support) return static_cast<int>(i);
  return -1;
}

Vecd RealizedMap::eval(const Vecd& x) const { return eval(x, nullptr); }

Matd RealizedMap::deriv(const Vecd& x) const {
  Matd j;
  eval(x, &j);
  return j;
}

Vecd RealizedMap::eval(const Vecd& x, Matd* jac) const {
  const int i = top_disk(x);
  if (i < 0) throw DomainError("point outside the stage-1 disks");
  const TowerStage& s = t_->stages.front();
  const auto ui = static_cast<std::size_t>(i);
  const auto un = static_cast<std::size_t>(wrap_index(i + 1, s.period));
  Vecd y = s.frames[ui].transpose() * (x - s.centers[ui]) / s.support;
  Matd jl;
  Vecd z = local_eval(0, i, y, jac ? &jl : nullptr);
  if (jac) *jac = s.frames[un] * jl * s.frames[ui].transpose();
  return s.centers[un] + s.support * (s.frames[un] * z);
}

Vecd RealizedMap::inverse(const Vecd& y) const {
  const int i1 = top_disk(y);
  if (i1 < 0) throw DomainError("point outside the stage-1 disks");
  const TowerStage& s = t_->stages.front();
  const auto ui1 = static_cast<std::size_t>(i1);
  const auto ui = static_cast<std::size_t>(wrap_index(i1 - 1, s.period));
  Vecd z = s.frames[ui1].transpose() * (y - s.centers[ui1]) / s.support;
  Vecd w = local_inverse(0, static_cast<std::int64_t>(ui), z);
  return s.centers[ui] + s.support * (s.frames[ui] * w);
}

std::optional<int> RealizedMap::child_slot(int n, const Vecd& y) const {
  if (n + 1 >= t_->depth()) return std::nullopt;
  const TowerStage& s = t_->stages[static_cast<std::size_t>(n)];
  const double ring = t_->layout.ring;
  const double rho = y.norm();
  if (rho < ring - s.child_scale || rho > ring + s.child_scale) return std::nullopt;
  const double ang = std::atan2(y(1), y(0)) - s.child_offset;
  const int b = s.branching;
  int k = static_cast<int>(std::lround(ang * b / kTwoPi));
  k = static_cast<int>(wrap_index(k, b));
  Vecd c = ring * (plane_rotation(t_->dim, s.child_offset + kTwoPi * k / b) * first_axis(t_->dim));
  if ((y - c).norm() < s.child_scale) return k;
  return std::nullopt;
}

double RealizedMap::twist_angle(int n, std::int64_t i, double rho, double* dtheta) const {
  if (dtheta) *dtheta = 0;
  const TowerStage& s = t_->stages[static_cast<std::size_t>(n)];
  if (n + 1 >= t_->depth() || i != s.period - 1) return 0;
  const TowerLayout& L = t_->layout;
  const double full = kTwoPi / s.branching;
  double tau = 0, dtau = 0;
  if (rho <= L.twist_in0 || rho >= L.twist_out1) {
    tau = 0;
  } else if (rho < L.twist_in1) {
    const double w = std::log(L.twist_in1 / L.twist_in0);
    const double v = std::log(rho / L.twist_in0) / w;
    tau = 1 - smooth_drop(v);
    dtau = -smooth_drop_deriv(v) / (rho * w);
  } else if (rho <= L.twist_out0) {
    tau = 1;
  } else {
    const double w = std::log(L.twist_out1 / L.twist_out0);
    const double v = std::log(rho / L.twist_out0) / w;
    tau = smooth_drop(v);
    dtau = smooth_drop_deriv(v) / (rho * w);
  }
  if (dtheta) *dtheta = full * dtau;
  return full * tau;
}

Vecd RealizedMap::local_eval(int n, std::int64_t i, const Vecd& y, Matd* jac) const {
  if (auto k = child_slot(n, y)) {
    const TowerStage& s = t_->stages[static_cast<std::size_t>(n)];
    const int d = t_->dim;
    const int b = s.branching;
    Matd r = plane_rotation(d, s.child_offset + kTwoPi * *k / b);
    Vecd c = t_->layout.ring * (r * first_axis(d));
    Vecd w = r.transpose() * (y - c) / s.child_scale;
    Matd jc;
    Vecd wc = local_eval(n + 1, i + s.period * *k, w, jac ? &jc : nullptr);
    Vecd z = c + s.child_scale * (r * wc);
    if (jac) *jac = r * jc * r.transpose();
    if (i == s.period - 1) {
      Matd carry = plane_rotation(d, kTwoPi / b);
      z = carry * z;
      if (jac) *jac = carry * *jac;
    }
    return z;
  }
  return piece_eval(n, i, y, jac);
}

Vecd RealizedMap::piece_eval(int n, std::int64_t i, const Vecd& y, Matd* jac) const {
  const int d = t_->dim;
  const TowerLayout& L = t_->layout;
  const double rho = y.norm();
  if (rho < L.insert) {
    Vecd u = y / L.insert;
    if (jac) *jac = insert_.deriv_core(u);
    return L.insert * insert_.eval_core(u);
  }
  if (rho >= L.shell0 && rho < 1) {
    const double span = 1 - L.shell0;
    const double u = (rho - L.shell0) / span;
    const double pi = std::numbers::pi;
    const double om = std::sin(pi * u) * std::sin(2 * pi * u);
    const double dom = pi * std::cos(pi * u) * std::sin(2 * pi * u) +
                       2 * pi * std::sin(pi * u) * std::cos(2 * pi * u);
    const double eta = L.shell_eps * om, deta = L.shell_eps * dom / span;
    const double e = std::exp(eta);
    if (jac) {
      Vecd h = y / rho;
      *jac = e * (Matd::Identity(d, d) + rho * deta * h * h.transpose());
    }
    return e * y;
  }
  double dtheta = 0;
  const double theta = twist_angle(n, i, rho, &dtheta);
  if (theta != 0 || dtheta != 0) {
    Matd r = plane_rotation(d, theta);
    if (jac) {
      Vecd h = y / rho;
      *jac = r * (Matd::Identity(d, d) + dtheta * plane_generator(d) * y * h.transpose());
    }
    return r * y;
  }
  if (jac) *jac = Matd::Identity(d, d);
  return y;
}

Vecd RealizedMap::local_inverse(int n, std::int64_t i, const Vecd& z) const {
  const int d = t_->dim;
  // the twist keeps |z|, so it is undone before locating the child
  const double theta = twist_angle(n, i, z.norm(), nullptr);
  Vecd zt = theta != 0 ? Vecd(plane_rotation(d, -theta) * z) : z;
  if (auto k = child_slot(n, zt)) {
    const TowerStage& s = t_->stages[static_cast<std::size_t>(n)];
    Matd r = plane_rotation(d, s.child_offset + kTwoPi * *k / s.branching);
    Vecd c = t_->layout.ring * (r * first_axis(d));
    Vecd w = r.transpose() * (zt - c) / s.child_scale;
    Vecd wc = local_inverse(n + 1, i + s.period * *k, w);
    return c + s.child_scale * (r * wc);
  }
  return piece_inverse(n, i, zt);
}

Vecd RealizedMap::piece_inverse(int, std::int64_t, const Vecd& z) const {
  const TowerLayout& L = t_->layout;
  const double r = z.norm();
  if (r < L.insert) return L.insert * insert_.inverse_core(z / L.insert);
  if (r >= L.shell0 && r < 1) {
    // rho e^eta(rho) is increasing on the shell and fixes both ends
    const double span = 1 - L.shell0;
    const double pi = std::numbers::pi;
    auto g = [&](double rho) {
      double u = (rho - L.shell0) / span;
      return rho * std::exp(L.shell_eps * std::sin(pi * u) * std::sin(2 * pi * u));
    };
    double lo = L.shell0, hi = 1;
    for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
      double mid = 0.5 * (lo + hi);
      if (g(mid) < r)
        lo = mid;
      else
        hi = mid;
    }
    return z * (0.5 * (lo + hi) / r);
  }
  return z;
}

// ---------------------------------------------------------------------------

double max_diameter(const TowerStage& s) {
  double dmax = 0;
  for (const auto& d : s.attracting.disks) dmax = std::max(dmax, 2 * d.radius);
  for (const auto& d : s.repelling.disks) dmax = std::max(dmax, 2 * d.radius);
  return dmax;
}

double disk_separation(const TowerStage& s) {
  double sep = std::numeric_limits<double>::infinity();
  const auto& ds = s.attracting.disks;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = i + 1; j < ds.size(); ++j)
      sep = std::min(sep, (ds[i].center - ds[j].center).norm() - ds[i].radius - ds[j].radius);
  return sep;
}

std::vector<Vecd> limit_set_sample(const Tower& t, std::int64_t count, bool* capped) {
  if (t.depth() < 2) throw TowerError("limit set sampling needs depth >= 2");
  const TowerStage& s = t.stages.back();
  if (capped) *capped = count > s.period;
  count = std::clamp<std::int64_t>(count, 0, s.period);
  return {s.centers.begin(), s.centers.begin() + count};
}

std::vector<LipschitzObservable> coordinate_observables(int dim) {
  std::vector<LipschitzObservable> out;
  for (int k = 0; k < dim; ++k)
    out.push_back({"x" + std::to_string(k), 1.0, [k](const Vecd& x) { return x(k); }});
  // the coordinates average to zero over every symmetric orbit; distances to
  // off-centre anchors do not
  const double anchors[][3] = {{0.3, 0.1, 0.05}, {-0.45, 0.2, -0.1}};
  for (int a = 0; a < 2; ++a) {
    Vecd c(dim);
    for (int k = 0; k < dim; ++k) c(k) = anchors[a][k];
    out.push_back({"dist" + std::to_string(a), 1.0, [c](const Vecd& x) { return (x - c).norm(); }});
  }
  return out;
}

WeakStarGap weak_star_gap(const Tower& t, const std::vector<LipschitzObservable>& obs, int level) {
  if (level < 1 || level > t.depth()) throw TowerError("level outside the tower");
  const TowerStage& s = t.stage(level);
  const TowerStage& deep = t.stages.back();
  WeakStarGap g;
  double lip = 0;
  for (const auto& o : obs) {
    lip = std::max(lip, o.lipschitz);
    // Kahan sums; the deepest orbit can be long
    auto mean = [](auto&& values, std::int64_t n) {
      double sum = 0, comp = 0;
      for (std::int64_t j = 0; j < n; ++j) {
        double y = values(j) - comp;
        double tt = sum + y;
        comp = (tt - sum) - y;
        sum = tt;
      }
      return sum / double(n);
    };
    // the orbit of p_n runs through the stage centres in index order; the
    // saddle amplifies rounding, so it is not iterated numerically
    double orbit = mean([&](std::int64_t j) { return o.fn(s.centers[static_cast<std::size_t>(j)]); }, s.period);
    double ref = mean([&](std::int64_t j) { return o.fn(deep.centers[static_cast<std::size_t>(j)]); },
                      deep.period);
    g.gap = std::max(g.gap, std::abs(orbit - ref));
  }
  g.bound = lip * max_diameter(s);
  return g;
}

TrivialityEvidence triviality_probe(const Tower& t, const Vecd& x, const Vecd& y, int horizon,
                                    double threshold) {
  if (horizon < 0 || horizon > kIterationBudget) throw std::invalid_argument("horizon exceeds the iteration budget");
  TrivialityEvidence ev;
  if ((x - y).norm() == 0) {
    ev.same_point = true;
    return ev;
  }
  RealizedMap f(t);
  Vecd a = x, b = y;
  for (int j = 0; j <= horizon; ++j) {
    ev.forward.push_back((a - b).norm());
    if (j < horizon) {
      a = f.eval(a);
      b = f.eval(b);
    }
  }
  a = x;
  b = y;
  for (int j = 0; j <= horizon; ++j) {
    ev.backward.push_back((a - b).norm());
    if (j < horizon) {
      a = f.inverse(a);
      b = f.inverse(b);
    }
  }
  ev.min_forward = *std::min_element(ev.forward.begin(), ev.forward.end());
  ev.min_backward = *std::min_element(ev.backward.begin(), ev.backward.end());
  ev.separates_forward = *std::max_element(ev.forward.begin(), ev.forward.end()) >= threshold;
  ev.separates_backward = *std::max_element(ev.backward.begin(), ev.backward.end()) >= threshold;
  return ev;
}

int escape_time(const Tower& t, int level, CycleRole role, const Vecd& y, int horizon) {
  const TowerStage& s = t.stage(level);
  const auto& disks = role == CycleRole::repelling ? s.repelling.disks : s.attracting.disks;
  auto inside = [&](const Vecd& p) {
    for (const auto& d : disks)
      if ((p - d.center).norm() <= d.radius) return true;
    return false;
  };
  RealizedMap f(t);
  Vecd p = y;
  for (int j = 0; j <= horizon; ++j) {
    if (!inside(p)) return j;
    p = role == CycleRole::repelling ? f.eval(p) : f.inverse(p);
  }
  return -1;
}

}  // namespace aperiodic
