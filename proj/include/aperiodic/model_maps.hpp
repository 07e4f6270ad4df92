#pragma once

// Explicit saddle diffeomorphisms of R^2 / R^3 with exact Jacobians.
//
// The core map is F(x) = exp(phi(|x|) * Lambda) x with Lambda diagonal and
// phi a C^1 bump in log-radius: linear on |x| <= r_in, identity on |x| >= r_out.
// An optional connector C o D is composed after F.  D pushes a small ball
// around a point of the unstable axis along -e_first, bending the axis into a
// symmetric bump; C then turns a larger ball by a quarter turn in the
// (first, last) coordinate plane, rigidly on its core, laying the bump down
// next to the stable hyperplane.  The depth of D is the one-parameter family
// in which the tangency is located; the fold sits on the line x_first = rot_cx.

#include "aperiodic/cocycle.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aperiodic {

// smoothstep on [0,1], 1 at 0 and 0 at 1
double smooth_drop(double v);
double smooth_drop_deriv(double v);

struct BumpProfile {
  double r_in = 0.005;
  double r_out = 1.0;

  void validate() const;
  double phi(double r) const;
  double dphi(double r) const;
  // sup |phi'|, attained where the log-radius slope peaks
  double max_slope() const;
};

struct ConnectorParams {
  bool enabled = false;
  double scale = 0.1;  // geometry below is in units of scale
  double rot_cx = 0.30, rot_cu = 0.32;
  double rot_core = 0.34, rot_outer = 0.37;
  double rot_angle = 1.5707963267948966;
  double dip_cx = 0.0, dip_cu = 0.32;
  double dip_core = 0.0, dip_outer = 0.06;
  double depth = 0.02;
  double depth_min = 0.01, depth_max = 0.03;

  void validate() const;
};

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SaddleModel {
 public:
  SaddleModel(Vecd log_rates, BumpProfile bump, ConnectorParams conn);

  int dim() const { return static_cast<int>(lambda_.size()); }
  const Vecd& log_rates() const { return lambda_; }
  const BumpProfile& bump() const { return bump_; }
  const ConnectorParams& connector() const { return conn_; }
  Matd linear_part() const;

  SaddleModel with_depth(double depth) const;
  SaddleModel without_connector() const;

  Vecd eval(const Vecd& x) const;
  Matd deriv(const Vecd& x) const;
  Vecd inverse(const Vecd& y) const;

  // the bump saddle alone, used for the tower inserts
  Vecd eval_core(const Vecd& x) const;
  Matd deriv_core(const Vecd& x) const;
  Vecd inverse_core(const Vecd& y) const;

  // connector pieces, in chart coordinates
  bool in_connector_support(const Vecd& x) const;
  Vecd rotation_center() const;
  Vecd dip_center() const;

 private:
  Vecd rot_eval(const Vecd& p, Matd* jac) const;
  Vecd rot_inverse(const Vecd& p) const;
  Vecd dip_eval(const Vecd& p, Matd* jac) const;
  Vecd dip_inverse(const Vecd& p) const;

  Vecd lambda_;
  BumpProfile bump_;
  ConnectorParams conn_;
};

// saddle with rates (-8/5, -8/5, 16/5); the tangency connector lives on the (x, t) plane.
SaddleModel make_model_3d(bool with_connector = true);
// planar saddle with rates (-lambda, lambda), lambda = 8/5
SaddleModel make_model_2d(bool with_connector = true, double lambda = 1.6);

struct BudgetGrid {
  double pitch = 0.01;   // lattice pitch over the region
  double radius = 1.0;   // region W is the ball of this radius
  int shells = 40;       // extra log-spaced shells below the lattice pitch
  int directions = 64;   // directions per shell
  bool exclude_connector = true;
  int max_failures = 20;
};

struct BudgetSample {
  Vecd x;
  double log_det;
  double log_inv_norm;
};

struct BudgetReport {
  long long samples = 0;
  double max_log_det = 0;
  double max_log_inv_norm = 0;
  Vecd argmax_log_det, argmax_log_inv_norm;
  double margin_jacobian = 0;  // 1 - max log|det|
  double margin_inverse = 0;   // 2 - max log||Df^-1||
  bool pass = false;
  std::vector<BudgetSample> failures;
  // connector neighbourhood, reported separately and never part of the verdict
  long long connector_samples = 0;
  double connector_max_log_det = 0;
  double connector_max_log_inv_norm = 0;
};

double log_inv_norm(const Matd& a);
BudgetReport verify_budget(const SaddleModel& m, const BudgetGrid& grid = {});

struct TangencyCertificate {
  Vecd z;
  Vecd direction;         // unit tangent of W^u at z
  double angle_residual;  // angle between T_z W^u and T_z W^s, radians
  double offset_residual; // stable-coordinate of z after entering the local box
  double depth;           // connector parameter at which the fold touches
  int unstable_iterate;   // z = G^n(point of the local unstable segment)
  int stable_entry;       // G^k(z) lies in the local stable patch
};

struct LandscapeEntry {
  double depth;
  std::vector<double> fold_values;   // offset of every fold of W^u
  std::vector<double> cross_angles;  // angle at every transverse crossing
};

class TangencySearchFailure : public std::runtime_error {
 public:
  TangencySearchFailure(std::string what, std::vector<LandscapeEntry> land, double min_angle)
      : std::runtime_error(std::move(what)), landscape(std::move(land)), min_angle(min_angle) {}
  std::vector<LandscapeEntry> landscape;
  double min_angle;  // smallest crossing angle seen, infinity if none
};

struct LocatorOptions {
  int unstable_iterates = 4;
  int stable_horizon = 30;
  int depth_samples = 12;
  int initial_samples = 64;
  double max_segment = 1e-3;
  double max_turn = 0.1;
  long long max_curve_samples = 200000;
  // only the leg of W^u that has gone through the connector at most this
  // often is searched; later legs carry the secondary tangencies
  int max_connector_passes = 1;
};

TangencyCertificate tangency_locator(const SaddleModel& m, const LocatorOptions& opt = {});

struct NoDominationReport {
  bool dim1_excluded = false;
  int max_k_tested = 0;
  int first_dominated_k = 0;  // 0 when no k was dominated
  bool dim2_excluded = false;
  bool complete = false;      // both exclusions hold
  std::string note;
};

NoDominationReport no_domination_certificate(const SaddleModel& m,
                                              const std::optional<TangencyCertificate>& cert,
                                              int K_max = 50);

}  // namespace aperiodic
