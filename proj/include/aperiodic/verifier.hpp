#pragma once

// Independent re-measurement of built towers and cocycle-level checks.
//
// The tower checks read only stored data (disks, periods, certificates) and
// the map rebuilt from that data.  They never reuse builder intermediates.

#include "aperiodic/cocycle.hpp"
#include "aperiodic/model_maps.hpp"
#include "aperiodic/tower.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace aperiodic {

struct CheckVerdict {
  std::string id;
  bool pass = false;
  double margin = 0;
  std::string witness;  // set on failure
  std::string note;
  std::vector<std::pair<std::string, double>> values;

  double value(const std::string& key) const;
};

struct VerdictReport {
  std::string subject;
  std::vector<CheckVerdict> items;

  bool all_pass() const;
  const CheckVerdict& at(const std::string& id) const;
  void add(CheckVerdict v) { items.push_back(std::move(v)); }
};

// names of the seven tower checks
namespace check {
inline constexpr const char* nesting = "nesting";
inline constexpr const char* attracting = "attracting_cycles";
inline constexpr const char* repelling = "repelling_cycles";
inline constexpr const char* shrinking = "shrinking_diameters";
inline constexpr const char* periods = "period_growth";
inline constexpr const char* budget = "derivative_budget";
inline constexpr const char* certificates = "periodic_certificates";
inline constexpr const char* all[] = {nesting, attracting, repelling, shrinking,
                                      periods,  budget,     certificates};
}  // namespace check

struct ExponentThresholds {
  double chi_plus;  // certificates need chi+ above this
  double chi_minus_lo = -2, chi_minus_hi = -1;
};
ExponentThresholds thresholds_for(int dim);

struct TowerCheckOptions {
  int sphere_directions = 64;
  int budget_inner_radii = 16;   // log-spaced inside the saddle insert
  int budget_outer_radii = 48;   // evenly spaced out to the attracting radius
  int budget_directions = 32;
  double orbit_tol = 1e-9;
};

VerdictReport check_theorem21(const Tower& t, const TowerCheckOptions& opt = {});

enum class Fault { nesting, attracting, repelling, shrinking, periods, budget, certificates };
inline constexpr Fault kAllFaults[] = {Fault::nesting,   Fault::attracting, Fault::repelling,
                                       Fault::shrinking, Fault::periods,    Fault::budget,
                                       Fault::certificates};
// the check that the fault targets
const char* fault_target(Fault f);
Tower inject_fault(const Tower& t, Fault f);

struct Prop22Result {
  double bound = 0;  // chi_c < bound
  bool pass = false;
  std::string reason;
};
Prop22Result check_prop22_arithmetic(double chi_plus_lb, std::pair<double, double> chi_minus_bounds,
                                     double J_ub);
// bounds read off a tower report: chi+ from the certificates, chi- floored by
// the measured inverse norm, J from the measured determinant
Prop22Result prop22_from_tower(const Tower& t, const VerdictReport& thm);

VerdictReport check_semicontinuity_chain(const Tower& t);
VerdictReport check_semicontinuity_chain(const std::vector<ExponentSpectrum<double>>& certs, int dim);

// weak-* gaps for the coordinate observables at every level, non-increasing
VerdictReport check_weak_star(const Tower& t);

struct TrivialityOptions {
  int horizon = 0;   // 0 means 10 m_K
  int samples = 100;
  unsigned seed = 1;
};
VerdictReport check_triviality(const Tower& t, const TrivialityOptions& opt = {});

// smallest gap between the deepest attracting disks of two towers; positive
// exactly when their limit sets sit in disjoint compact neighbourhoods
double class_separation(const Tower& a, const Tower& b);

// ----- periodic-point properties -------------------------------------------

struct OrbitRecord {
  std::string id;
  Cocycled cocycle;
  std::vector<std::string> homoclinic_to;
  std::vector<std::string> robust_cycle_with;
  std::optional<Vecd> location;
};

VerdictReport check_property_P(const std::vector<OrbitRecord>& db, const std::string& p);

struct NoDominationResult {
  bool dim1_excluded = false, dim2_excluded = false;
  int dominated_k = 0;  // first k at which a spectral splitting was dominated
  int dominated_dim = 0;
};
// splittings of a saddle orbit joined with the orbit of a homoclinic point z:
// a dimension is excluded when the orbit of p alone is not dominated for
// k <= K_max there, or when z is a tangency for the stable/unstable pair
NoDominationResult no_domination_for(const Cocycled& c, const std::optional<TangencyCertificate>& cert,
                                     int K_max);

VerdictReport check_property_P_prime(const OrbitRecord& p,
                                     const std::optional<TangencyCertificate>& cert, int K_max = 50);

// ----- sink / source surgery ------------------------------------------------

class DominationPresent : public std::runtime_error {
 public:
  DominationPresent(std::string what, SplittingCandidate<double> s, int k)
      : std::runtime_error(std::move(what)), splitting(std::move(s)), k(k) {}
  SplittingCandidate<double> splitting;
  int k;
};

class SurgeryFailure : public std::runtime_error {
 public:
  SurgeryFailure(std::string what, double best) : std::runtime_error(std::move(what)), best_radius(best) {}
  double best_radius;
};

struct SurgeryResult {
  Cocycled sink, source;
  double sink_radius = 0;          // spectral radius of the sink period product
  double source_inverse_radius = 0;
  double max_perturbation = 0;     // max_i ||P_i - Id||
};

SurgeryResult surgery_sink_source(const Cocycled& c, double eps = 0.1, int K_max = 50);

}  // namespace aperiodic
