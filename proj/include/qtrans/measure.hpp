#pragma once

// Grid geometry, discrete state distributions, lifted (atom + piecewise
// constant) measures, and the exact 1-D Wasserstein engine.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "qtrans/error.hpp"

namespace qtrans {

/// Discretization geometry. States are indexed 0..m_delta; state i >= 1
/// stands for the interval ((i-1)delta, i*delta], state 0 for the point 0.
struct Grid {
  double delta = 0.0;
  int m_delta = 0;
  bool zero_state = true;

  Grid() = default;
  Grid(double d, int md, bool zero) : delta(d), m_delta(md), zero_state(zero) {
    if (!(delta > 0 && std::isfinite(delta))) throw DomainError("grid needs delta > 0");
    if (m_delta < 1) throw DomainError("grid needs m_delta >= 1");
  }

  double m() const { return m_delta * delta; }
  double point(int i) const { return i * delta; }
  int first_state() const { return zero_state ? 0 : 1; }
  std::size_t size() const { return static_cast<std::size_t>(m_delta) + 1; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.delta == b.delta && a.m_delta == b.m_delta && a.zero_state == b.zero_state;
  }
};

/// Probabilities over states 0..m_delta. Without a zero state p[0] stays 0.
struct DiscreteDist {
  Grid grid;
  std::vector<double> p;

  DiscreteDist() = default;
  explicit DiscreteDist(const Grid& g) : grid(g), p(g.size(), 0.0) {}

  static DiscreteDist one_hot(const Grid& g, int i) {
    if (i < g.first_state() || i > g.m_delta) throw DomainError("state index outside the grid");
    DiscreteDist d(g);
    d.p[i] = 1.0;
    return d;
  }

  double total() const { return std::accumulate(p.begin(), p.end(), 0.0); }
};

/// Atom at 0 plus uniform mass on each interval ((i-1)delta, i*delta].
struct LiftedDistribution {
  Grid grid;
  double atom0 = 0.0;
  std::vector<double> interval_mass;  // entry i-1 belongs to interval i

  double total() const {
    return atom0 + std::accumulate(interval_mass.begin(), interval_mass.end(), 0.0);
  }

  double cdf(double x) const {
    if (x < 0) return 0.0;
    const double d = grid.delta;
    double c = atom0;
    for (int i = 1; i <= grid.m_delta; ++i) {
      const double hi = grid.point(i);
      if (x >= hi) {
        c += interval_mass[i - 1];
      } else {
        c += interval_mass[i - 1] * (x - grid.point(i - 1)) / d;
        break;
      }
    }
    return c;
  }

  double mean() const {
    double s = 0.0;
    for (int i = 1; i <= grid.m_delta; ++i) s += interval_mass[i - 1] * (i - 0.5) * grid.delta;
    return s;
  }
};

/// Equation-(1) style lift of a state distribution.
inline LiftedDistribution lift(const DiscreteDist& d) {
  LiftedDistribution out;
  out.grid = d.grid;
  out.atom0 = d.grid.zero_state ? d.p[0] : 0.0;
  out.interval_mass.assign(d.p.begin() + 1, d.p.end());
  return out;
}

/// Finite mixture of atoms and uniform pieces on [0, inf).
struct GeneralMeasure {
  struct Atom {
    double x;
    double mass;
  };
  struct Piece {
    double a;
    double b;
    double mass;
  };
  std::vector<Atom> atoms;
  std::vector<Piece> pieces;

  static GeneralMeasure dirac(double x) { return GeneralMeasure{{{x, 1.0}}, {}}; }
  static GeneralMeasure uniform(double a, double b) { return GeneralMeasure{{}, {{a, b, 1.0}}}; }

  double total() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.mass;
    for (const auto& p : pieces) s += p.mass;
    return s;
  }

  double support_upper() const {
    double s = 0.0;
    for (const auto& a : atoms) s = std::max(s, a.x);
    for (const auto& p : pieces) s = std::max(s, p.b);
    return s;
  }

  void validate() const {
    for (const auto& a : atoms)
      if (!(a.x >= 0 && std::isfinite(a.x) && a.mass >= 0)) throw DomainError("invalid atom in measure");
    for (const auto& p : pieces)
      if (!(p.a >= 0 && p.b >= p.a && std::isfinite(p.b) && p.mass >= 0))
        throw DomainError("invalid uniform piece in measure");
    if (std::abs(total() - 1.0) > 1e-9) throw DomainError("measure is not normalized");
  }

  double cdf(double x) const {
    double c = 0.0;
    for (const auto& a : atoms)
      if (a.x <= x) c += a.mass;
    for (const auto& p : pieces) {
      if (x >= p.b) c += p.mass;
      else if (x > p.a) c += p.mass * (x - p.a) / (p.b - p.a);
    }
    return c;
  }
};

inline GeneralMeasure to_general(const LiftedDistribution& l) {
  GeneralMeasure g;
  if (l.atom0 > 0) g.atoms.push_back({0.0, l.atom0});
  for (int i = 1; i <= l.grid.m_delta; ++i)
    if (l.interval_mass[i - 1] > 0)
      g.pieces.push_back({l.grid.point(i - 1), l.grid.point(i), l.interval_mass[i - 1]});
  return g;
}

/// Sorted CDF events of a measure: jumps (atoms) and slope changes (piece
/// endpoints). The CDF is piecewise linear between consecutive events.
class CdfProfile {
 public:
  struct Event {
    double x;
    double jump;
    double slope;
  };

  CdfProfile() = default;

  explicit CdfProfile(const GeneralMeasure& m) {
    m.validate();
    for (const auto& a : m.atoms)
      if (a.mass > 0) events_.push_back({a.x, a.mass, 0.0});
    for (const auto& p : m.pieces) {
      if (p.mass <= 0) continue;
      if (p.b == p.a) {
        events_.push_back({p.a, p.mass, 0.0});
        continue;
      }
      const double s = p.mass / (p.b - p.a);
      events_.push_back({p.a, 0.0, s});
      events_.push_back({p.b, 0.0, -s});
    }
    finish();
  }

  /// Same events as the general form of l, so that a lifted law and its
  /// general form compare bit-identically.
  explicit CdfProfile(const LiftedDistribution& l) : CdfProfile(to_general(l)) {}

  /// Empirical measure of the given samples, each with weight weights[i]
  /// (or 1/n when weights is empty). Samples must be sorted.
  static CdfProfile empirical_sorted(const std::vector<double>& sorted,
                                     const std::vector<double>& weights = {}) {
    CdfProfile c;
    const double w = 1.0 / static_cast<double>(sorted.size());
    c.events_.reserve(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double m = weights.empty() ? w : weights[i];
      if (m == 0) continue;
      if (!c.events_.empty() && c.events_.back().x == sorted[i]) c.events_.back().jump += m;
      else c.events_.push_back({sorted[i], m, 0.0});
    }
    return c;
  }

  const std::vector<Event>& events() const { return events_; }

 private:
  void finish() {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.x < b.x; });
    std::vector<Event> merged;
    for (const Event& e : events_) {
      if (!merged.empty() && merged.back().x == e.x) {
        merged.back().jump += e.jump;
        merged.back().slope += e.slope;
      } else {
        merged.push_back(e);
      }
    }
    events_ = std::move(merged);
  }

  std::vector<Event> events_;
};

namespace detail {

/// Exact integral of |D| over a segment of length len where D is linear
/// from d0 to d1.
inline double abs_linear_integral(double d0, double d1, double len) {
  if ((d0 >= 0) == (d1 >= 0) || d0 == 0 || d1 == 0) return 0.5 * len * (std::abs(d0) + std::abs(d1));
  return 0.5 * len * (d0 * d0 + d1 * d1) / (std::abs(d0) + std::abs(d1));
}

}  // namespace detail

/// W1 distance as the integral of |F_a - F_b|; both CDFs are piecewise
/// linear with jumps, so each segment is integrated in closed form.
inline double wasserstein(const CdfProfile& a, const CdfProfile& b) {
  const auto& ea = a.events();
  const auto& eb = b.events();
  std::size_t ia = 0, ib = 0;
  double x = 0.0;
  double diff = 0.0;
  double slope = 0.0;
  double sum = 0.0;
  bool started = false;
  while (ia < ea.size() || ib < eb.size()) {
    const double xa = ia < ea.size() ? ea[ia].x : INFINITY;
    const double xb = ib < eb.size() ? eb[ib].x : INFINITY;
    const double nx = std::min(xa, xb);
    if (started && nx > x) {
      const double end = diff + slope * (nx - x);
      sum += detail::abs_linear_integral(diff, end, nx - x);
      diff = end;
    }
    started = true;
    x = nx;
    if (xa == nx) {
      diff += ea[ia].jump;
      slope += ea[ia].slope;
      ++ia;
    }
    if (xb == nx) {
      diff -= eb[ib].jump;
      slope -= eb[ib].slope;
      ++ib;
    }
  }
  return sum;
}

inline double wasserstein(const GeneralMeasure& a, const GeneralMeasure& b) {
  return wasserstein(CdfProfile(a), CdfProfile(b));
}
inline double wasserstein(const LiftedDistribution& a, const LiftedDistribution& b) {
  return wasserstein(CdfProfile(a), CdfProfile(b));
}
inline double wasserstein(const GeneralMeasure& a, const LiftedDistribution& b) {
  return wasserstein(CdfProfile(a), CdfProfile(b));
}
inline double wasserstein(const LiftedDistribution& a, const GeneralMeasure& b) {
  return wasserstein(CdfProfile(a), CdfProfile(b));
}

/// Mass of (x, inf).
inline double threshold_mass(const LiftedDistribution& m, double x) {
  if (x < 0) return m.total();
  const Grid& g = m.grid;
  if (x >= g.m()) return 0.0;
  const int k = std::min(static_cast<int>(std::floor(x / g.delta)), g.m_delta - 1);
  double s = 0.0;
  for (int i = g.m_delta; i > k + 1; --i) s += m.interval_mass[i - 1];
  const double frac = std::clamp((g.point(k + 1) - x) / g.delta, 0.0, 1.0);
  return s + m.interval_mass[k] * frac;
}

inline double threshold_mass(const GeneralMeasure& m, double x) { return m.total() - m.cdf(x); }

/// CSV rows interval_lo,interval_hi,mass,density with one leading atom row
/// (density "inf"). Values use 17 significant digits.
inline void write_density_csv(std::ostream& os, const LiftedDistribution& m) {
  char buf[160];
  os << "interval_lo,interval_hi,mass,density\n";
  std::snprintf(buf, sizeof buf, "0,0,%.17g,inf\n", m.atom0);
  os << buf;
  for (int i = 1; i <= m.grid.m_delta; ++i) {
    const double mass = m.interval_mass[i - 1];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", m.grid.point(i - 1),
                  m.grid.point(i), mass, mass / m.grid.delta);
    os << buf;
  }
}

}  // namespace qtrans
