#pragma once

// Finite-depth adding machines on Z/m_1 <- Z/m_2 <- ... <- Z/m_K.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace aperiodic {

class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TowerSchedule {
 public:
  TowerSchedule() = default;
  explicit TowerSchedule(std::vector<std::int64_t> periods);

  int depth() const { return static_cast<int>(m_.size()); }
  // level is 1-based, as in m_1 < m_2 < ...
  std::int64_t period(int level) const { return m_.at(static_cast<std::size_t>(level - 1)); }
  std::int64_t deepest() const { return m_.back(); }
  const std::vector<std::int64_t>& periods() const { return m_; }

 private:
  std::vector<std::int64_t> m_;
};

struct OdometerPoint {
  std::vector<std::int64_t> residues;  // residues[n-1] lives in Z/m_n
  bool operator==(const OdometerPoint&) const = default;
};

struct CylinderSet {
  int level = 1;
  std::int64_t residue = 0;
};

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  static Rational make(std::int64_t n, std::int64_t d);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

// weights indexed by residue at one level
struct CylinderObservable {
  int level = 1;
  std::vector<double> weights;
  double operator()(const OdometerPoint& p) const {
    return weights.at(static_cast<std::size_t>(p.residues.at(static_cast<std::size_t>(level - 1))));
  }
};

bool is_compatible(const OdometerPoint& p, const TowerSchedule& s);
OdometerPoint zero_point(const TowerSchedule& s);
// the point whose deepest residue is r
OdometerPoint point_from_deepest(const TowerSchedule& s, std::int64_t r);

OdometerPoint successor(const OdometerPoint& p, const TowerSchedule& s);
OdometerPoint predecessor(const OdometerPoint& p, const TowerSchedule& s);

double cylinder_measure(const TowerSchedule& s, const CylinderSet& c);
Rational cylinder_measure_exact(const TowerSchedule& s, const CylinderSet& c);

bool minimality_check(const TowerSchedule& s, int level);

double birkhoff_average(const OdometerPoint& p, const TowerSchedule& s,
                        const CylinderObservable& obs, std::int64_t N);
// visit frequency of a cylinder, kept as a fraction
Rational birkhoff_frequency(const OdometerPoint& p, const TowerSchedule& s, const CylinderSet& c,
                            std::int64_t N);

}  // namespace aperiodic
