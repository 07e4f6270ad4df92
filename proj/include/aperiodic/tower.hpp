#pragma once

// Nested attracting / repelling disk towers and the piecewise map they encode.
//
// Every disk is a round ball with a support radius s_n shared by its level,
// a centre and an orthonormal frame (a rotation of the first coordinate plane).
// In the unit coordinates of a disk the map is built radially:
//
//   rho < insert           scaled copy of the saddle core (the periodic point)
//   [twist_in0, twist_out1] quarter or third turn of the child ring, only on
//                           the last disk of a cycle (the odometer carry)
//   ring +- child radius    children, each a rescaled copy of the same picture
//   [shell0, 1]             radial shell rho -> rho e^eta: pushes out at the
//                           repelling radius and in at the attracting radius
//
// so the map is a rigid motion on every child ball, and deeper levels are
// conjugate to the top one by similarities.

#include "aperiodic/cocycle.hpp"
#include "aperiodic/model_maps.hpp"
#include "aperiodic/odometer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace aperiodic {

class TowerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// radii in units of the support radius of the host disk
struct TowerLayout {
  double insert = 0.01;
  double twist_in0 = 0.012, twist_in1 = 0.04;
  double ring = 0.07;
  double twist_out0 = 0.1, twist_out1 = 0.33;
  double shell0 = 0.35;
  double shell_eps = 0.05;
  double repel_u = 0.25, attract_u = 0.75;  // shell parameter of E and D
  double child_cap = 0.025;
  double stage1_circle = 0.5;  // absolute radius of the circle of stage-1 centres

  double repel_radius() const { return shell0 + repel_u * (1 - shell0); }
  double attract_radius() const { return shell0 + attract_u * (1 - shell0); }
  void validate() const;
};

struct Disk {
  Vecd center;
  double radius = 0;
  Matd frame;
};

enum class CycleRole { attracting, repelling };

struct DiskCycle {
  CycleRole role = CycleRole::attracting;
  std::vector<Disk> disks;
};

struct PeriodicPointCert {
  Vecd location;
  std::int64_t period = 0;
  Cocycled cocycle;
  ExponentSpectrum<double> spectrum;
};

struct TowerStage {
  int level = 1;
  std::int64_t period = 0;
  double support = 0;
  std::vector<Vecd> centers;
  std::vector<Matd> frames;
  DiskCycle attracting, repelling;
  PeriodicPointCert cert;
  // how the next stage sits inside this one; zero for the deepest stage
  int branching = 0;
  double child_scale = 0;
  double child_offset = 0;
};

struct Tower {
  int dim = 3;
  Vecd insert_rates;
  BumpProfile bump;
  TowerLayout layout;
  std::vector<TowerStage> stages;
  std::string word;  // branch word, empty for a plain tower

  int depth() const { return static_cast<int>(stages.size()); }
  const TowerStage& stage(int level) const { return stages.at(static_cast<std::size_t>(level - 1)); }
};

// smallest support radius the builder accepts, well above rounding noise
inline constexpr double kSupportFloor = 2e-9;

Tower seed_stage(const SaddleModel& m, std::int64_t m1, double delta1, TowerLayout layout = {});
Tower refine(const Tower& t, int b, double delta, std::int64_t m0);
// two children placed in the same ring, slots offset by half a slot
std::pair<Tower, Tower> refine_pair(const Tower& t, int b, double delta, std::int64_t m0);
// every binary word of the given length, leaves ordered lexicographically
std::vector<Tower> branch_forest(const Tower& seed, int word_depth, int b, double delta_ratio,
                                 std::int64_t m0 = 1);

// builds K stages with the given branching per refinement and diameters
// shrinking by delta_ratio; the common entry point of the CLI and the tests
struct BuildConfig {
  int dim = 3;
  int depth = 3;
  std::vector<int> branching{3};  // last entry repeats
  std::int64_t m1 = 2;
  double delta1 = 0.2;
  double delta_ratio = 0.5;
  std::int64_t m0 = 1;
};
Tower build_tower(const BuildConfig& cfg);

// the disk pair whose combinatorics break the odometer labelling
class NestingViolation : public TowerError {
 public:
  NestingViolation(const std::string& what, int level, std::int64_t from, std::int64_t to)
      : TowerError(what), level(level), from(from), to(to) {}
  int level;
  std::int64_t from, to;  // f(D_{level,from}) should lie in D_{level,to}, or D_{level,from} in D_{level-1,to}
};

// schedule of the tower, with D_{n,i} labelled by the cylinder (n, i); checks
// that f moves D_{n,i} into D_{n,i+1} and that D_{n+1,j} sits in D_{n,j mod m_n}
TowerSchedule conjugacy_from_tower(const Tower& t);

// twist shear bound for a carry of 2 pi / b on the layout ramps
double twist_log_inv_norm(const TowerLayout& layout, int b);

class RealizedMap {
 public:
  explicit RealizedMap(const Tower& t);

  // index of the stage-1 support ball containing x (or, for inverse, f(x)), -1 if none
  int top_disk(const Vecd& x) const;
  bool in_domain(const Vecd& x) const { return top_disk(x) >= 0; }

  Vecd eval(const Vecd& x) const;
  Matd deriv(const Vecd& x) const;
  Vecd eval(const Vecd& x, Matd* jac) const;
  Vecd inverse(const Vecd& y) const;

  const Tower& tower() const { return *t_; }

 private:
  Vecd local_eval(int n, std::int64_t i, const Vecd& y, Matd* jac) const;
  Vecd local_inverse(int n, std::int64_t i, const Vecd& z) const;
  Vecd piece_eval(int n, std::int64_t i, const Vecd& y, Matd* jac) const;
  Vecd piece_inverse(int n, std::int64_t i, const Vecd& z) const;
  std::optional<int> child_slot(int n, const Vecd& y) const;
  double twist_angle(int n, std::int64_t i, double rho, double* dtheta) const;

  const Tower* t_;
  SaddleModel insert_;
};

// rotation by a in the first coordinate plane
Matd plane_rotation(int dim, double a);

double max_diameter(const TowerStage& s);
// smallest gap between distinct attracting disks of a stage
double disk_separation(const TowerStage& s);

// deepest disk centres; count is capped at m_K
std::vector<Vecd> limit_set_sample(const Tower& t, std::int64_t count, bool* capped = nullptr);

struct LipschitzObservable {
  std::string name;
  double lipschitz = 1;
  std::function<double(const Vecd&)> fn;
};
// the coordinate functions and distances to two fixed anchors, all 1-Lipschitz
std::vector<LipschitzObservable> coordinate_observables(int dim);

struct WeakStarGap {
  double gap = 0;
  double bound = 0;  // Lip * max stage diameter
};
// average over the orbit of p_n against the measure that puts equal mass on
// the deepest centres (the odometer measure read through the tower)
WeakStarGap weak_star_gap(const Tower& t, const std::vector<LipschitzObservable>& obs, int level);

struct TrivialityEvidence {
  std::vector<double> forward, backward;  // distances along the two orbits
  bool same_point = false;
  bool separates_forward = false;
  bool separates_backward = false;
  double min_forward = 0, min_backward = 0;
};
TrivialityEvidence triviality_probe(const Tower& t, const Vecd& x, const Vecd& y, int horizon,
                                    double threshold);

// first step at which the orbit of y leaves the union of the stage's disks
// of the given role, forward for repelling and backward for attracting; -1 if
// it never does within the horizon
int escape_time(const Tower& t, int level, CycleRole role, const Vecd& y, int horizon);

}  // namespace aperiodic
