#pragma once

// Periodic matrix cocycles over a finite orbit: exponents, Jacobian rate,
// subadditive norm bounds and exact domination tests.  Dimensions 2 and 3.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aperiodic {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1, 0, 3, 1>;
template <class S>
using Basis = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

using Matd = Mat<double>;
using Vecd = Vec<double>;

class InvalidCocycle : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotHyperbolic : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonInvariantSplitting : public std::runtime_error {
 public:
  NonInvariantSplitting(int index, double residual)
      : std::runtime_error("splitting not invariant at base index " + std::to_string(index) +
                           " (residual " + std::to_string(residual) + ")"),
        index(index),
        residual(residual) {}
  int index;
  double residual;
};

// Moduli closer than this (relative) belong to one eigenvalue group.
inline constexpr double kModulusGroupTol = 1e-9;
inline constexpr double kHyperbolicTol = 1e-9;
inline constexpr double kInvarianceTol = 1e-8;
inline constexpr long long kIterationBudget = 1000000;

template <class S>
class PeriodicCocycle {
 public:
  PeriodicCocycle() = default;

  explicit PeriodicCocycle(std::vector<Mat<S>> matrices) : mats_(std::move(matrices)) {
    if (mats_.empty()) throw InvalidCocycle("cocycle needs at least one matrix");
    dim_ = static_cast<int>(mats_.front().rows());
    if (dim_ != 2 && dim_ != 3) throw InvalidCocycle("cocycle dimension must be 2 or 3");
    for (std::size_t i = 0; i < mats_.size(); ++i) {
      const auto& a = mats_[i];
      if (a.rows() != dim_ || a.cols() != dim_)
        throw InvalidCocycle("matrix " + std::to_string(i) + " has the wrong shape");
      if (!a.allFinite()) throw InvalidCocycle("matrix " + std::to_string(i) + " is not finite");
      // singular up to rounding: the condition number, not the determinant,
      // since strongly anisotropic saddles have tiny determinants-per-scale
      auto sv = Eigen::JacobiSVD<Mat<S>>(a).singularValues();
      if (!(sv(dim_ - 1) > S(1e-14) * sv(0)))
        throw InvalidCocycle("matrix " + std::to_string(i) + " is singular");
    }
  }

  int dim() const { return dim_; }
  int period() const { return static_cast<int>(mats_.size()); }
  const std::vector<Mat<S>>& matrices() const { return mats_; }

  // cyclic access, any integer index
  const Mat<S>& at(long long i) const {
    long long m = period();
    return mats_[static_cast<std::size_t>(((i % m) + m) % m)];
  }

  PeriodicCocycle rotated(int r) const {
    std::vector<Mat<S>> out;
    for (int i = 0; i < period(); ++i) out.push_back(at(i + r));
    return PeriodicCocycle(std::move(out));
  }

 private:
  int dim_ = 0;
  std::vector<Mat<S>> mats_;
};

using Cocycled = PeriodicCocycle<double>;

template <class S>
struct ExponentSpectrum {
  std::vector<S> values;  // non-increasing
  bool has_complex_pair = false;

  S chi_plus() const { return values.front(); }
  S chi_minus() const { return values.back(); }
  S chi_center() const {
    if (values.size() != 3) throw std::logic_error("center exponent needs dimension 3");
    return values[1];
  }
  S sum() const {
    S s = 0;
    for (S v : values) s += v;
    return s;
  }
};

// Product of a run of matrices with the norm factored into a log accumulator.
template <class S>
struct ScaledMat {
  Mat<S> m;
  S log_scale = 0;
};

namespace detail {

template <class S>
void renormalize(ScaledMat<S>& p) {
  S n = p.m.cwiseAbs().maxCoeff();
  if (n > S(0) && std::isfinite(n)) {
    p.m /= n;
    p.log_scale += std::log(n);
  }
}

template <class S>
S spectral_radius(const Mat<S>& m, bool* non_real = nullptr) {
  Eigen::EigenSolver<Mat<S>> es(m, false);
  auto ev = es.eigenvalues();
  S best = -1;
  int arg = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) > best) {
      best = std::abs(ev[i]);
      arg = i;
    }
  }
  if (non_real) *non_real = std::abs(ev[arg].imag()) > S(1e-7) * std::max(best, S(1e-300));
  return best;
}

template <class S>
Vec<S> dominant_eigenvector(const Mat<S>& m) {
  Eigen::EigenSolver<Mat<S>> es(m, true);
  auto ev = es.eigenvalues();
  int arg = 0;
  for (int i = 1; i < ev.size(); ++i)
    if (std::abs(ev[i]) > std::abs(ev[arg])) arg = i;
  Vec<S> v = es.eigenvectors().col(arg).real();
  return v / v.norm();
}

// 2x2 minors, rows/cols indexed by (0,1),(0,2),(1,2)
template <class S>
Mat<S> second_compound(const Mat<S>& a) {
  static const int pr[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  Mat<S> c(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) {
      int i = pr[r][0], j = pr[r][1], k = pr[s][0], l = pr[s][1];
      c(r, s) = a(i, k) * a(j, l) - a(i, l) * a(j, k);
    }
  return c;
}

template <class S>
S op_norm(const Mat<S>& m) {
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<Mat<S>> svd(m);
  return svd.singularValues()(0);
}

// orthonormal basis of the complement of a unit vector
template <class S>
Basis<S> complement(const Vec<S>& v) {
  Mat<S> col = v;
  Eigen::HouseholderQR<Mat<S>> qr(col);
  Mat<S> q = qr.householderQ();
  return q.rightCols(v.size() - 1);
}

}  // namespace detail

// A_{i+len-1} ... A_{i+1} A_i, renormalized every step.
template <class S>
ScaledMat<S> scaled_product(const PeriodicCocycle<S>& c, long long start, long long len) {
  ScaledMat<S> p{Mat<S>::Identity(c.dim(), c.dim()), 0};
  for (long long j = 0; j < len; ++j) {
    p.m = c.at(start + j) * p.m;
    detail::renormalize(p);
  }
  return p;
}

// A_i^{-1} A_{i+1}^{-1} ... A_{i+len-1}^{-1}, the inverse of scaled_product.
template <class S>
ScaledMat<S> scaled_inverse_product(const PeriodicCocycle<S>& c, long long start, long long len) {
  ScaledMat<S> q{Mat<S>::Identity(c.dim(), c.dim()), 0};
  for (long long j = len - 1; j >= 0; --j) {
    q.m = c.at(start + j).inverse() * q.m;
    detail::renormalize(q);
  }
  return q;
}

template <class S>
Mat<S> product(const PeriodicCocycle<S>& c) {
  Mat<S> p = Mat<S>::Identity(c.dim(), c.dim());
  for (const auto& a : c.matrices()) p = a * p;
  return p;
}

template <class S>
ExponentSpectrum<S> exponents_periodic(const PeriodicCocycle<S>& c) {
  const int d = c.dim();
  const int m = c.period();
  ExponentSpectrum<S> out;

  auto top = scaled_product(c, 0, m);
  bool top_complex = false;
  S rho = detail::spectral_radius(top.m, &top_complex);
  auto inv = scaled_inverse_product(c, 0, m);
  bool bottom_complex = false;
  S rho_inv = detail::spectral_radius(inv.m, &bottom_complex);
  if (!(rho > 0) || !(rho_inv > 0)) throw InvalidCocycle("period product is singular");

  S chi1 = (std::log(rho) + top.log_scale) / m;
  S chid = -(std::log(rho_inv) + inv.log_scale) / m;

  if (d == 2) {
    out.values = {chi1, chid};
    out.has_complex_pair = top_complex || bottom_complex;
  } else {
    ScaledMat<S> w{Mat<S>::Identity(3, 3), 0};
    for (int j = 0; j < m; ++j) {
      w.m = detail::second_compound(c.at(j)) * w.m;
      detail::renormalize(w);
    }
    S rho2 = detail::spectral_radius(w.m);
    S chi2 = (std::log(rho2) + w.log_scale) / m - chi1;
    out.values = {chi1, std::clamp(chi2, chid, chi1), chid};
    out.has_complex_pair = top_complex || bottom_complex;
  }
  return out;
}

template <class S>
S log_jacobian_rate(const PeriodicCocycle<S>& c) {
  S s = 0;
  for (const auto& a : c.matrices()) s += std::log(std::abs(a.determinant()));
  return s / c.period();
}

// Exponent indices grouped by equal modulus (relative tolerance on moduli).
template <class S>
std::vector<std::vector<int>> modulus_groups(const PeriodicCocycle<S>& c,
                                             const ExponentSpectrum<S>& sp) {
  std::vector<std::vector<int>> groups;
  const S m = c.period();
  for (int i = static_cast<int>(sp.values.size()) - 1; i >= 0; --i) {
    if (!groups.empty()) {
      S gap = m * (sp.values[groups.back().front()] - sp.values[i]);
      if (std::abs(std::expm1(gap)) <= S(kModulusGroupTol)) {
        groups.back().push_back(i);
        continue;
      }
    }
    groups.push_back({i});
  }
  return groups;  // ascending modulus, each group lists its exponent indices
}

template <class S>
S subadditive_top_bound(const PeriodicCocycle<S>& c, long long n) {
  if (n < 1) throw std::invalid_argument("subadditive_top_bound needs n >= 1");
  const long long m = c.period();
  const long long steps = n * m;
  if (steps > kIterationBudget) throw BudgetExceeded("n*m exceeds the iteration budget");
  S total = 0;
  for (long long i = 0; i < m; ++i) {
    auto p = scaled_product(c, i, steps);
    total += (std::log(detail::op_norm(p.m)) + p.log_scale) / S(steps);
  }
  return total / S(m);
}

template <class S>
struct TopExponentEstimate {
  S estimate;
  S chi_plus;
  S constant;  // n_max * |estimate - chi_plus|
};

template <class S>
TopExponentEstimate<S> top_exponent_limit_estimate(const PeriodicCocycle<S>& c, long long n_max) {
  S est = subadditive_top_bound(c, n_max);
  S chi = exponents_periodic(c).chi_plus();
  return {est, chi, S(n_max) * std::abs(est - chi)};
}

// Subspace families along the orbit, orthonormal columns.
template <class S>
struct SplittingCandidate {
  std::vector<Basis<S>> E;
  std::vector<Basis<S>> F;
  int dim_E() const { return static_cast<int>(E.front().cols()); }
  int dim_F() const { return static_cast<int>(F.front().cols()); }
};

namespace detail {

template <class S>
S invariance_residual(const Mat<S>& a, const Basis<S>& from, const Basis<S>& to) {
  Mat<S> img = a * from;
  Mat<S> off = img - to * (to.transpose() * img);
  return off.norm() / img.norm();
}

// log of the largest singular value of the k-step product restricted to the family
template <class S>
S restricted_log_max_sv(const PeriodicCocycle<S>& c, const std::vector<Basis<S>>& fam, int i,
                        int k) {
  const int m = c.period();
  int dimv = static_cast<int>(fam.front().cols());
  ScaledMat<S> p{Mat<S>::Identity(dimv, dimv), 0};
  for (int j = 0; j < k; ++j) {
    int b = (i + j) % m;
    int nb = (b + 1) % m;
    Mat<S> r = fam[nb].transpose() * c.at(b) * fam[b];
    p.m = r * p.m;
    renormalize(p);
  }
  return std::log(op_norm(p.m)) + p.log_scale;
}

// log of the smallest singular value, through the inverse restricted product
template <class S>
S restricted_log_min_sv(const PeriodicCocycle<S>& c, const std::vector<Basis<S>>& fam, int i,
                        int k) {
  const int m = c.period();
  int dimv = static_cast<int>(fam.front().cols());
  ScaledMat<S> p{Mat<S>::Identity(dimv, dimv), 0};
  for (int j = k - 1; j >= 0; --j) {
    int b = (i + j) % m;
    int nb = (b + 1) % m;
    Mat<S> r = fam[nb].transpose() * c.at(b) * fam[b];
    p.m = r.inverse() * p.m;
    renormalize(p);
  }
  // p = (restricted k-step product)^{-1}
  return -(std::log(op_norm(p.m)) + p.log_scale);
}

}  // namespace detail

template <class S>
S splitting_invariance_residual(const PeriodicCocycle<S>& c, const SplittingCandidate<S>& s,
                                int* worst_index = nullptr) {
  S worst = 0;
  for (int i = 0; i < c.period(); ++i) {
    int nb = (i + 1) % c.period();
    S r = std::max(detail::invariance_residual(c.at(i), s.E[i], s.E[nb]),
                   detail::invariance_residual(c.at(i), s.F[i], s.F[nb]));
    if (r > worst) {
      worst = r;
      if (worst_index) *worst_index = i;
    }
  }
  return worst;
}

template <class S>
bool is_k_dominated(const PeriodicCocycle<S>& c, const SplittingCandidate<S>& s, int k) {
  if (k < 1) throw std::invalid_argument("domination order must be positive");
  const int m = c.period();
  if (static_cast<int>(s.E.size()) != m || static_cast<int>(s.F.size()) != m)
    throw std::invalid_argument("splitting families must have one entry per base index");
  if (s.dim_E() < 1 || s.dim_F() < 1 || s.dim_E() + s.dim_F() != c.dim())
    throw std::invalid_argument("splitting dimensions must be positive and sum to d");
  int bad = 0;
  S res = splitting_invariance_residual(c, s, &bad);
  if (res > S(kInvarianceTol)) throw NonInvariantSplitting(bad, static_cast<double>(res));

  const S log_half = std::log(S(0.5));
  for (int i = 0; i < m; ++i) {
    S e = detail::restricted_log_max_sv(c, s.E, i, k);
    S f = detail::restricted_log_min_sv(c, s.F, i, k);
    if (!(e < log_half + f)) return false;
  }
  return true;
}

// Spectral splitting of the orbit at the boundary between the lowest
// `dim_E` exponents and the rest.  Each base point uses its own cyclic product.
template <class S>
SplittingCandidate<S> spectral_splitting(const PeriodicCocycle<S>& c, int dim_E) {
  const int d = c.dim();
  const int m = c.period();
  if (dim_E < 1 || dim_E >= d) throw std::invalid_argument("bad splitting dimension");
  SplittingCandidate<S> s;
  for (int i = 0; i < m; ++i) {
    auto fwd = scaled_product(c, i, m).m;
    auto bwd = scaled_inverse_product(c, i, m).m;
    Basis<S> E, F;
    if (dim_E == 1) {
      E = detail::dominant_eigenvector<S>(bwd);
      if (d == 2) {
        F = detail::dominant_eigenvector<S>(fwd);
      } else {
        Vec<S> left = detail::dominant_eigenvector<S>(Mat<S>(bwd.transpose()));
        F = detail::complement(left);
      }
    } else {
      F = detail::dominant_eigenvector<S>(fwd);
      Vec<S> left = detail::dominant_eigenvector<S>(Mat<S>(fwd.transpose()));
      E = detail::complement(left);
    }
    s.E.push_back(E);
    s.F.push_back(F);
  }
  return s;
}

// Splitting dimensions admitted by the modulus gaps of the period product.
template <class S>
std::vector<int> spectral_gap_dims(const PeriodicCocycle<S>& c) {
  auto sp = exponents_periodic(c);
  auto groups = modulus_groups(c, sp);
  std::vector<int> dims;
  int acc = 0;
  for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
    acc += static_cast<int>(groups[g].size());
    dims.push_back(acc);
  }
  return dims;
}

template <class S>
std::optional<SplittingCandidate<S>> find_dominated_splitting(const PeriodicCocycle<S>& c,
                                                              int k) {
  for (int dE : spectral_gap_dims(c)) {
    auto s = spectral_splitting(c, dE);
    if (is_k_dominated(c, s, k)) return s;
  }
  return std::nullopt;
}

struct EigenFlags {
  bool stable_complex = false;
  bool unstable_complex = false;
};

template <class S>
EigenFlags eigenvalue_flags(const PeriodicCocycle<S>& c) {
  const int d = c.dim();
  const int m = c.period();
  auto sp = exponents_periodic(c);
  for (S v : sp.values)
    if (std::abs(std::expm1(m * v)) <= S(kHyperbolicTol))
      throw NotHyperbolic("eigenvalue of modulus one in the period product");

  bool top_complex = false, bottom_complex = false;
  detail::spectral_radius(scaled_product(c, 0, m).m, &top_complex);
  detail::spectral_radius(scaled_inverse_product(c, 0, m).m, &bottom_complex);
  EigenFlags f;
  auto mark = [&](S chi) {
    if (chi < 0)
      f.stable_complex = true;
    else
      f.unstable_complex = true;
  };
  if (top_complex) mark(sp.values[0]);
  if (bottom_complex) mark(sp.values[d - 1]);
  return f;
}

// limsup over a finite list, read as the maximum over its final quarter.
template <class S>
bool semicontinuity_check(const std::vector<ExponentSpectrum<S>>& spectra,
                          const ExponentSpectrum<S>& limit, S tol) {
  if (spectra.empty()) throw std::invalid_argument("semicontinuity_check needs spectra");
  std::size_t n = spectra.size();
  std::size_t tail = std::max<std::size_t>(1, (n + 3) / 4);
  S sup = -std::numeric_limits<S>::infinity();
  for (std::size_t i = n - tail; i < n; ++i) sup = std::max(sup, spectra[i].chi_plus());
  return sup <= limit.chi_plus() + tol;
}

}  // namespace aperiodic
