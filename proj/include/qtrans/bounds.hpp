#pragma once

// Per-step Wasserstein error components and their accumulation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qtrans/error.hpp"
#include "qtrans/job_size.hpp"
#include "qtrans/kernel.hpp"
#include "qtrans/measure.hpp"

namespace qtrans {

enum class BoundMode {
  basic,          ///< lambda delta^2 e^{-lambda delta}
  refined,        ///< per-state one-jump aggregation distances, weighted by p_k
  refined_worst,  ///< worst per-state distance, computed once
};

inline const char* to_string(BoundMode m) {
  switch (m) {
    case BoundMode::basic: return "basic";
    case BoundMode::refined: return "refined";
    case BoundMode::refined_worst: return "refined-worst";
  }
  return "?";
}

inline std::optional<BoundMode> parse_bound_mode(const std::string& s) {
  if (s == "basic") return BoundMode::basic;
  if (s == "refined") return BoundMode::refined;
  if (s == "refined-worst" || s == "refined_worst") return BoundMode::refined_worst;
  return std::nullopt;
}

namespace detail {

/// 1 - (1 + x) e^{-x}, accurate for small x.
inline double one_minus_poisson01(double x) {
  if (x > 0.5) return 1.0 - (1.0 + x) * std::exp(-x);
  double term = x * x / 2;  // (-1)^m x^m / m! at m = 2
  double sum = 0.0;
  for (int m = 2; m < 40; ++m) {
    sum += (m - 1) * term;
    term *= -x / (m + 1);
  }
  return sum;
}

}  // namespace detail

inline double e_jmpagg_basic(double lambda, double delta) {
  return lambda * delta * delta * std::exp(-lambda * delta);
}

inline double e_jmpcut_mg1(double lambda, double delta, std::optional<double> mean_b) {
  if (!mean_b) throw CertificationError("Wasserstein bound requires E[B] to be finite");
  return lambda * delta * -std::expm1(-lambda * delta) * *mean_b;
}

inline double e_jmpcut_specneg(double lambda, double delta, std::optional<double> mean_b, double m) {
  const double cut = detail::one_minus_poisson01(lambda * delta) * (m + delta);
  if (!mean_b) return cut;
  return std::min(lambda * delta * -std::expm1(-lambda * delta) * *mean_b, cut);
}

inline double e_trunc_mg1(double lambda, double delta, int i, const Grid& grid, const JobSize& job) {
  if (i < 0 || i > grid.m_delta) throw DomainError("state index outside the grid");
  const auto tail = job.tail_mean(std::max(0.0, grid.m() - i * delta));
  if (!tail) throw CertificationError("Wasserstein bound requires E[B] to be finite");
  return lambda * delta * std::exp(-lambda * delta) * *tail;
}

inline double e_trunc_specneg(double lambda, double delta, int i, const Grid& grid) {
  if (i < 1 || i > grid.m_delta) throw DomainError("state index outside the grid");
  return i == grid.m_delta ? delta * std::exp(-lambda * delta) : 0.0;
}

namespace detail {

/// A one-jump conditional CDF on a family of grid intervals, with what is
/// known about its shape.
struct ResidualShape {
  std::function<double(double)> phi;
  std::function<double(double, double)> integral;               // may be empty
  std::function<std::optional<int>(double, double)> curvature;  // sign of phi''
  std::vector<double> splits;
  double scale = 1.0;  // magnitude of arguments, for the rounding guard
  int cells = 1024;
};

/// Density of the job law if it is constant on the open interval (lo, hi).
inline std::optional<double> constant_density(const JobSize& job, double lo, double hi) {
  const auto t = job.density_trend(lo, hi);
  if (!t || *t != 0) return std::nullopt;
  const double m1 = lo + 0.25 * (hi - lo), m2 = lo + 0.75 * (hi - lo);
  return (job.cdf(m2) - job.cdf(m1)) / (m2 - m1);
}

/// Sign of f(z) - f(z - shift) for z in (a, c), where f is the job density;
/// falls back to the density trend over the hull.
inline std::optional<int> shifted_density_sign(const JobSize& job, double a, double c, double shift) {
  const auto hi = constant_density(job, a, c);
  const auto lo = constant_density(job, a - shift, c - shift);
  if (hi && lo) return *hi > *lo ? 1 : (*hi < *lo ? -1 : 0);
  return job.density_trend(a - shift, c);
}

/// Upper bound on the integral over [u, v] of |phi - chord|, where the chord
/// interpolates phi at u and v. phi must be non-decreasing.
inline double interval_residual(const ResidualShape& s, double u, double v) {
  const double pu = s.phi(u), pv = s.phi(v);
  const double len = v - u;
  const double eps = std::numeric_limits<double>::epsilon();
  const double guard = len * 16 * eps * (1 + s.scale);
  if (pu == pv && (pu == 0.0 || pu == 1.0)) return 0.0;
  auto chord = [&](double y) { return pu + (pv - pu) * (y - u) / len; };

  std::vector<double> pts{u};
  for (double b : s.splits)
    if (b > u && b < v) pts.push_back(b);
  pts.push_back(v);

  double total = guard;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double a = pts[k], c = pts[k + 1];
    if (!(c > a)) continue;
    const std::optional<int> curv = s.curvature ? s.curvature(a, c) : std::nullopt;
    const double ra = s.phi(a) - chord(a);
    const double rc = s.phi(c) - chord(c);
    if (curv && *curv == 0) {
      total += abs_linear_integral(ra, rc, c - a);
      continue;
    }
    if (curv && s.integral && ((*curv > 0 && ra <= 0 && rc <= 0) || (*curv < 0 && ra >= 0 && rc >= 0))) {
      const double chord_int = 0.5 * (chord(a) + chord(c)) * (c - a);
      total += std::abs(s.integral(a, c) - chord_int);
      continue;
    }
    const int n = s.cells;
    const double h = (c - a) / n;
    double y0 = a, f0 = s.phi(a);
    for (int m = 1; m <= n; ++m) {
      const double y1 = m == n ? c : a + m * h;
      const double f1 = s.phi(y1);
      total += (y1 - y0) * std::max(std::abs(f1 - chord(y0)), std::abs(f0 - chord(y1)));
      y0 = y1;
      f0 = f1;
    }
  }
  return total;
}

}  // namespace detail

/// Per-state upper bounds w_i on the Wasserstein distance between the
/// one-jump law of the next position (started uniformly in state i) and its
/// projection to piecewise-uniform on the grid. Destinations beyond the
/// truncation are excluded here; they are charged to the truncation term.
class OneJumpProfile {
 public:
  static OneJumpProfile build(const ModelSpec& spec, const Grid& grid) {
    OneJumpProfile out;
    const int n = grid.m_delta;
    out.w_.assign(n + 1, grid.delta);
    if (!spec.job.has_closed_form() || spec.absorbing_zero) return out;
    out.available_ = true;
    if (spec.kind == ProcessKind::mg1) out.build_mg1(spec, grid);
    else out.build_specneg(spec, grid);
    for (int i = 0; i <= n; ++i) out.w_[i] = std::min(out.w_[i], grid.delta);
    if (!grid.zero_state) out.w_[0] = 0.0;
    return out;
  }

  /// False when the family offers no shape information; every w_i is then
  /// the trivial bound delta.
  bool available() const { return available_; }
  const std::vector<double>& per_state() const { return w_; }
  double worst(const Grid& grid) const {
    double m = 0.0;
    for (int i = grid.first_state(); i <= grid.m_delta; ++i) m = std::max(m, w_[i]);
    return m;
  }

 private:
  std::vector<double> breakpoints(const JobSize& job) const { return job.density_breakpoints(); }

  void build_mg1(const ModelSpec& spec, const Grid& grid) {
    const JobSize& job = spec.job;
    const double d = grid.delta;
    const int n = grid.m_delta;
    const double upper = job.support_upper();
    const int kmax = std::isfinite(upper)
                         ? static_cast<int>(std::min<double>(std::ceil(upper / d), n))
                         : n;
    const std::vector<double> bp = breakpoints(job);

    // Rows i >= 2 and row 0: position relative to the row is U + B with U
    // uniform on (0, delta].
    detail::ResidualShape gen;
    gen.phi = [&job, d](double z) { return job.cdf_integral(z - d, z).value / d; };
    gen.integral = [&job, d](double a, double c) { return job.shifted_window_integral(a, c, d) / d; };
    gen.curvature = [&job, d](double a, double c) { return detail::shifted_density_sign(job, a, c, d); };
    for (double b : bp) {
      gen.splits.push_back(b);
      gen.splits.push_back(b + d);
    }
    std::sort(gen.splits.begin(), gen.splits.end());
    const int nmax = std::min(kmax, n);
    std::vector<double> r(nmax + 1, 0.0);
    for (int m = 0; m <= nmax; ++m) {
      gen.scale = m + 2.0;
      r[m] = detail::interval_residual(gen, m * d, (m + 1) * d);
    }
    // prefix[m] = r[0] + ... + r[m-1]
    std::vector<double> prefix(nmax + 2, 0.0);
    for (int m = 0; m <= nmax; ++m) prefix[m + 1] = prefix[m] + r[m];
    auto rsum = [&](int lo, int hi) {
      hi = std::min(hi, nmax);
      if (hi < lo) return 0.0;
      return prefix[hi + 1] - prefix[lo];
    };
    w_[0] = rsum(1, n);
    for (int i = 2; i <= n; ++i) w_[i] = rsum(0, n - i + 1);

    // Row 1: the effective service before the jump has a triangular law.
    if (n >= 1) {
      detail::ResidualShape tri;
      tri.phi = [&job, d](double y) {
        return std::clamp(2.0 / (d * d) * job.moment_integral(y, y + d, y + d).value, 0.0, 1.0);
      };
      tri.curvature = [&job, d](double a, double c) { return job.density_trend(a, c + d); };
      for (double b : bp) {
        tri.splits.push_back(b - d);
        tri.splits.push_back(b);
      }
      std::sort(tri.splits.begin(), tri.splits.end());
      tri.cells = 256;
      double w1 = 0.0;
      const int mmax = std::min(n - 1, kmax);
      for (int m = 0; m <= mmax; ++m) {
        tri.scale = m + 2.0;
        w1 += detail::interval_residual(tri, m * d, (m + 1) * d);
      }
      w_[1] = w1;
    }
  }

  void build_specneg(const ModelSpec& spec, const Grid& grid) {
    const JobSize& job = spec.job;
    const double d = grid.delta;
    const int n = grid.m_delta;
    const double upper = job.support_upper();
    const int kmax = std::isfinite(upper)
                         ? static_cast<int>(std::min<double>(std::ceil(upper / d), n))
                         : n;
    const std::vector<double> bp = breakpoints(job);

    // Destinations above the first interval: position relative to the row
    // is U - B.
    detail::ResidualShape gen;
    gen.phi = [&job, d](double z) {
      return std::clamp(1.0 - job.cdf_integral(-z, d - z).value / d, 0.0, 1.0);
    };
    gen.integral = [&job, d](double a, double c) {
      return (c - a) - job.shifted_window_integral(d - c, d - a, d) / d;
    };
    gen.curvature = [&job, d](double a, double c) -> std::optional<int> {
      const auto t = detail::shifted_density_sign(job, d - c, d - a, d);
      if (!t) return std::nullopt;
      return -*t;
    };
    for (double b : bp) {
      gen.splits.push_back(-b);
      gen.splits.push_back(d - b);
    }
    std::sort(gen.splits.begin(), gen.splits.end());
    // r[q] covers z in ((n_q - 1) d, n_q d] with n_q = 1 - q.
    const int qmax = std::min(n - 1, kmax + 1);
    std::vector<double> r(qmax + 1, 0.0);
    for (int q = 0; q <= qmax; ++q) {
      const int nq = 1 - q;
      gen.scale = q + 2.0;
      r[q] = detail::interval_residual(gen, (nq - 1) * d, nq * d);
    }
    std::vector<double> prefix(qmax + 2, 0.0);
    for (int q = 0; q <= qmax; ++q) prefix[q + 1] = prefix[q] + r[q];

    detail::ResidualShape first;
    first.cells = 256;
    for (int i = 1; i <= n; ++i) {
      // n ranges over [2 - i, 1], i.e. q over [0, i - 1].
      const int qhi = std::min(i - 1, qmax);
      double w = prefix[qhi + 1];
      const double x = i * d;
      // Survival constant around x makes phi linear in y.
      if (job.cdf(x - d) != job.cdf(x + d)) {
        first.phi = [&job, d, x](double y) {
          return std::clamp(y / d * (1.0 - job.cdf_integral(x - y, x + d - y).value / d), 0.0, 1.0);
        };
        first.scale = i + 2.0;
        w += detail::interval_residual(first, 0.0, d);
      }
      w_[i] = w;
    }
  }

  std::vector<double> w_;
  bool available_ = false;
};

/// Error components charged for one step.
struct StepBound {
  double e_jmpagg = 0.0;
  double e_jmpcut = 0.0;
  double e_trunc_weighted = 0.0;
  double slack = 0.0;

  double total() const { return e_jmpagg + e_jmpcut + e_trunc_weighted + slack; }
};

/// Evaluates the per-step bound for a fixed model, grid and mode.
class StepBoundCalculator {
 public:
  StepBoundCalculator(const TransitionKernel& kernel, BoundMode mode) : mode_(mode) {
    const ModelSpec& spec = kernel.spec();
    const Grid& grid = kernel.grid();
    grid_ = grid;
    const double lam = spec.lambda;
    const double d = grid.delta;
    const double e = std::exp(-lam * d);
    lde_ = lam * d * e;
    basic_ = e_jmpagg_basic(lam, d);
    const auto mean = spec.job.mean();
    row_error_ = kernel.row_error();
    trunc_.assign(grid.m_delta + 1, 0.0);
    if (spec.kind == ProcessKind::mg1) {
      jmpcut_ = e_jmpcut_mg1(lam, d, mean);
      for (int i = 0; i <= grid.m_delta; ++i) trunc_[i] = e_trunc_mg1(lam, d, i, grid, spec.job);
    } else {
      jmpcut_ = e_jmpcut_specneg(lam, d, mean, grid.m());
      // Top state: the drift leaves the truncated range (distance delta), and
      // single jumps shorter than the drift can also end above M; that mass
      // is kept in the top interval, at most 2 delta from where it belongs.
      trunc_[grid.m_delta] = e_trunc_specneg(lam, d, grid.m_delta, grid) +
                             2 * d * e * lam * spec.job.cdf_integral(0.0, d).value;
    }
    certified_ = !spec.absorbing_zero;
    if (mode_ != BoundMode::basic) {
      profile_ = OneJumpProfile::build(spec, grid);
      worst_ = std::min(lde_ * profile_.worst(grid), basic_);
    }
  }

  BoundMode mode() const { return mode_; }
  bool certified() const { return certified_; }
  bool refinement_available() const { return profile_.available(); }
  double jmpcut() const { return jmpcut_; }
  const std::vector<double>& trunc_per_state() const { return trunc_; }
  const OneJumpProfile& profile() const { return profile_; }

  /// `rounding_l1` is the L1 rounding error reported by the kernel apply
  /// that produced p.
  StepBound step(const DiscreteDist& p, double rounding_l1 = 0.0) const {
    StepBound s;
    const auto& w = profile_.per_state();
    double agg = 0.0, trunc = 0.0, quad = 0.0;
    for (int i = grid_.first_state(); i <= grid_.m_delta; ++i) {
      const double pi = p.p[i];
      if (pi == 0) continue;
      if (mode_ == BoundMode::refined) agg += pi * w[i];
      trunc += pi * trunc_[i];
      quad += pi * row_error_[i];
    }
    switch (mode_) {
      case BoundMode::basic: s.e_jmpagg = basic_; break;
      case BoundMode::refined: s.e_jmpagg = std::min(lde_ * agg, basic_); break;
      case BoundMode::refined_worst: s.e_jmpagg = worst_; break;
    }
    s.e_jmpcut = jmpcut_;
    s.e_trunc_weighted = trunc;
    const double span = grid_.m() + grid_.delta;
    const double eps = std::numeric_limits<double>::epsilon();
    s.slack = span * (quad + rounding_l1) + 4 * eps * (grid_.m_delta + 1) * (basic_ + jmpcut_ + trunc);
    return s;
  }

 private:
  BoundMode mode_;
  Grid grid_;
  double lde_ = 0.0;
  double basic_ = 0.0;
  double jmpcut_ = 0.0;
  double worst_ = 0.0;
  std::vector<double> trunc_;
  std::vector<double> row_error_;
  OneJumpProfile profile_;
  bool certified_ = true;
};

/// Cumulative certified bound: cumulative[0] = b0 and each step adds its
/// components to the previous value (the error carried over from the last
/// step does not grow under the shared dynamics).
struct BoundLedger {
  double b0 = 0.0;
  std::vector<StepBound> steps;
  std::vector<double> cumulative;
  /// Probability mass moved by the diagonal correction, accumulated.
  std::vector<double> cut_mass;
  bool certified = true;

  explicit BoundLedger(double initial = 0.0) : b0(initial), cumulative{initial}, cut_mass{0.0} {}

  void append(const StepBound& s, double moved_mass = 0.0) {
    steps.push_back(s);
    cumulative.push_back(cumulative.back() + s.total());
    cut_mass.push_back(cut_mass.back() + moved_mass);
  }

  double at(std::size_t k) const { return cumulative.at(k); }

  void write_csv(std::ostream& os, double delta) const {
    char buf[256];
    os << "step,time,e_jmpagg,e_jmpcut,e_trunc_weighted,slack,cumulative\n";
    std::snprintf(buf, sizeof buf, "0,0,0,0,0,0,%.17g\n", b0);
    os << buf;
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const StepBound& s = steps[k];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k + 1,
                    (k + 1) * delta, s.e_jmpagg, s.e_jmpcut, s.e_trunc_weighted, s.slack,
                    cumulative[k + 1]);
      os << buf;
    }
  }
};

}  // namespace qtrans
