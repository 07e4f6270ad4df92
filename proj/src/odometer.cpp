#include "aperiodic/odometer.hpp"

namespace aperiodic {

TowerSchedule::TowerSchedule(std::vector<std::int64_t> periods) : m_(std::move(periods)) {
  if (m_.empty()) throw ScheduleError("schedule needs at least one level");
  if (m_.front() < 1) throw ScheduleError("periods must be positive");
  for (std::size_t n = 1; n < m_.size(); ++n) {
    if (m_[n] <= m_[n - 1])
      throw ScheduleError("periods must increase strictly (level " + std::to_string(n + 1) + ")");
    if (m_[n] % m_[n - 1] != 0)
      throw ScheduleError("m_" + std::to_string(n) + " = " + std::to_string(m_[n - 1]) +
                          " does not divide m_" + std::to_string(n + 1) + " = " +
                          std::to_string(m_[n]));
  }
}

Rational Rational::make(std::int64_t n, std::int64_t d) {
  if (d == 0) throw std::invalid_argument("zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  std::int64_t g = std::gcd(n < 0 ? -n : n, d);
  if (g == 0) g = 1;
  return {n / g, d / g};
}

bool is_compatible(const OdometerPoint& p, const TowerSchedule& s) {
  if (p.residues.size() != static_cast<std::size_t>(s.depth())) return false;
  for (int n = 1; n <= s.depth(); ++n) {
    auto x = p.residues[static_cast<std::size_t>(n - 1)];
    if (x < 0 || x >= s.period(n)) return false;
    if (n > 1 && x % s.period(n - 1) != p.residues[static_cast<std::size_t>(n - 2)]) return false;
  }
  return true;
}

OdometerPoint zero_point(const TowerSchedule& s) {
  return OdometerPoint{std::vector<std::int64_t>(static_cast<std::size_t>(s.depth()), 0)};
}

OdometerPoint point_from_deepest(const TowerSchedule& s, std::int64_t r) {
  std::int64_t mk = s.deepest();
  r = ((r % mk) + mk) % mk;
  OdometerPoint p;
  for (int n = 1; n <= s.depth(); ++n) p.residues.push_back(r % s.period(n));
  return p;
}

static void require_compatible(const OdometerPoint& p, const TowerSchedule& s) {
  if (!is_compatible(p, s)) throw ScheduleError("odometer point incompatible with schedule");
}

OdometerPoint successor(const OdometerPoint& p, const TowerSchedule& s) {
  require_compatible(p, s);
  OdometerPoint q = p;
  for (int n = 1; n <= s.depth(); ++n) {
    auto& x = q.residues[static_cast<std::size_t>(n - 1)];
    x = (x + 1) % s.period(n);
  }
  return q;
}

OdometerPoint predecessor(const OdometerPoint& p, const TowerSchedule& s) {
  require_compatible(p, s);
  OdometerPoint q = p;
  for (int n = 1; n <= s.depth(); ++n) {
    auto& x = q.residues[static_cast<std::size_t>(n - 1)];
    x = (x + s.period(n) - 1) % s.period(n);
  }
  return q;
}

Rational cylinder_measure_exact(const TowerSchedule& s, const CylinderSet& c) {
  if (c.level < 1 || c.level > s.depth()) throw ScheduleError("cylinder level out of range");
  if (c.residue < 0 || c.residue >= s.period(c.level))
    throw ScheduleError("cylinder residue out of range");
  return Rational::make(1, s.period(c.level));
}

double cylinder_measure(const TowerSchedule& s, const CylinderSet& c) {
  return cylinder_measure_exact(s, c).value();
}

bool minimality_check(const TowerSchedule& s, int level) {
  if (level < 1 || level > s.depth()) throw ScheduleError("level out of range");
  const std::int64_t ml = s.period(level);
  std::vector<char> seen(static_cast<std::size_t>(ml), 0);
  OdometerPoint z = zero_point(s);
  OdometerPoint p = z;
  std::int64_t first_return = 0;
  for (std::int64_t j = 1; j <= ml; ++j) {
    seen[static_cast<std::size_t>(p.residues[static_cast<std::size_t>(level - 1)])] = 1;
    p = successor(p, s);
    bool back = p.residues[static_cast<std::size_t>(level - 1)] == 0;
    if (back && first_return == 0) first_return = j;
  }
  for (char v : seen)
    if (!v) return false;
  return first_return == ml;
}

double birkhoff_average(const OdometerPoint& p, const TowerSchedule& s,
                        const CylinderObservable& obs, std::int64_t N) {
  if (N < 1) throw std::invalid_argument("Birkhoff average needs N >= 1");
  // Kahan summation keeps full-cycle averages at rounding level
  double sum = 0, comp = 0;
  OdometerPoint q = p;
  for (std::int64_t j = 0; j < N; ++j) {
    double y = obs(q) - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    q = successor(q, s);
  }
  return sum / static_cast<double>(N);
}

Rational birkhoff_frequency(const OdometerPoint& p, const TowerSchedule& s, const CylinderSet& c,
                            std::int64_t N) {
  if (N < 1) throw std::invalid_argument("Birkhoff frequency needs N >= 1");
  std::int64_t hits = 0;
  OdometerPoint q = p;
  for (std::int64_t j = 0; j < N; ++j) {
    if (q.residues.at(static_cast<std::size_t>(c.level - 1)) == c.residue) ++hits;
    q = successor(q, s);
  }
  return Rational::make(hits, N);
}

}  // namespace aperiodic
