#pragma once

// Job (or claim) size distributions and the integral primitives the kernel
// and bound code is built from. All built-in families provide closed-form
// first and second antiderivatives of the CDF, both from the left
// (G1, G2: integrals of F from 0) and from the right (T1, T2: integrals of
// the survival function to +inf). Combinations are evaluated in whichever
// form avoids cancellation at the arguments involved.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "qtrans/error.hpp"
#include "qtrans/quadrature.hpp"

namespace qtrans {

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Split of a Poisson(y) law at n: lower = P(N < n), upper = P(N >= n).
/// Whichever side is small is summed directly so neither loses precision.
struct PoissonSplit {
  double lower;
  double upper;
};

inline PoissonSplit poisson_split(int n, double y) {
  if (n <= 0) return {0.0, 1.0};
  if (y <= 0.0) return {1.0, 0.0};
  const double log_y = std::log(y);
  auto pmf = [&](int k) { return std::exp(-y + k * log_y - std::lgamma(k + 1.0)); };
  if (y < n) {
    double t = pmf(n);
    double sum = 0.0;
    for (int k = n; t > 0.0 && t > sum * 1e-18; ++k) {
      sum += t;
      t *= y / (k + 1);
    }
    return {1.0 - sum, sum};
  }
  double t = pmf(n - 1);
  double sum = 0.0;
  for (int k = n - 1; k >= 0; --k) {
    sum += t;
    t *= k / y;
  }
  return {sum, 1.0 - sum};
}

/// Tail of the exponential series: sum_{m >= k} (-y)^m / m!.
inline double exp_series_tail(int k, double y) {
  if (y > 1.0) {
    double head = 0.0;
    double term = 1.0;
    for (int m = 0; m < k; ++m) {
      head += term;
      term *= -y / (m + 1);
    }
    return std::exp(-y) - head;
  }
  double term = 1.0;
  for (int m = 1; m <= k; ++m) term *= -y / m;
  double sum = 0.0;
  for (int m = k; m < k + 30; ++m) {
    sum += term;
    term *= -y / (m + 1);
  }
  return sum;
}

/// (u^p - 1) / p, continuous at p = 0 where it equals log(u).
inline double pow_minus_one_over(double u, double p) {
  const double lu = std::log(u);
  if (p == 0.0) return lu;
  return std::expm1(p * lu) / p;
}

}  // namespace detail

namespace family {

struct Uniform {
  double lo;
  double hi;

  double width() const { return hi - lo; }
  double cdf(double x) const { return x < lo ? 0.0 : (x < hi ? (x - lo) / width() : 1.0); }
  double survival(double x) const { return x < lo ? 1.0 : (x < hi ? (hi - x) / width() : 0.0); }
  double g1(double x) const {
    const double w = width();
    if (x <= lo) return 0.0;
    if (x <= hi) return (x - lo) * (x - lo) / (2 * w);
    return w / 2 + (x - hi);
  }
  double g2(double x) const {
    const double w = width();
    if (x <= lo) return 0.0;
    if (x <= hi) return std::pow(x - lo, 3) / (6 * w);
    const double d = x - hi;
    return w * w / 6 + w / 2 * d + d * d / 2;
  }
  double t1(double x) const {
    const double w = width();
    if (x >= hi) return 0.0;
    if (x >= lo) return (hi - x) * (hi - x) / (2 * w);
    return (lo - x) + w / 2;
  }
  double t2(double x) const {
    const double w = width();
    if (x >= hi) return 0.0;
    if (x >= lo) return std::pow(hi - x, 3) / (6 * w);
    const double d = lo - x;
    return w * w / 6 + w / 2 * d + d * d / 2;
  }
  std::optional<double> mean() const { return 0.5 * (lo + hi); }
  double upper() const { return hi; }
  std::vector<double> breakpoints() const { return {lo, hi}; }
  int trend(double, double) const { return 0; }
  template <class Rng>
  double sample(Rng& rng) const {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
};

struct Exponential {
  double rate;

  double cdf(double x) const { return x < 0 ? 0.0 : -std::expm1(-rate * x); }
  double survival(double x) const { return x < 0 ? 1.0 : std::exp(-rate * x); }
  double g1(double x) const { return detail::exp_series_tail(2, rate * x) / rate; }
  double g2(double x) const { return -detail::exp_series_tail(3, rate * x) / (rate * rate); }
  double t1(double x) const { return std::exp(-rate * x) / rate; }
  double t2(double x) const { return std::exp(-rate * x) / (rate * rate); }
  std::optional<double> mean() const { return 1.0 / rate; }
  double upper() const { return detail::kInf; }
  std::vector<double> breakpoints() const { return {0.0}; }
  int trend(double lo, double) const { return lo >= 0.0 ? -1 : 0; }
  template <class Rng>
  double sample(Rng& rng) const {
    return std::exponential_distribution<double>(rate)(rng);
  }
};

struct Erlang {
  int shape;
  double rate;

  double cdf(double x) const { return detail::poisson_split(shape, rate * x).upper; }
  double survival(double x) const { return detail::poisson_split(shape, rate * x).lower; }
  double g1(double x) const {
    const double y = rate * x;
    const double n = shape;
    return (y * detail::poisson_split(shape, y).upper -
            n * detail::poisson_split(shape + 1, y).upper) /
           rate;
  }
  double g2(double x) const {
    const double y = rate * x;
    const double n = shape;
    return (0.5 * y * y * detail::poisson_split(shape, y).upper -
            n * y * detail::poisson_split(shape + 1, y).upper +
            0.5 * n * (n + 1) * detail::poisson_split(shape + 2, y).upper) /
           (rate * rate);
  }
  // T1 = (1/r) sum_{k=1..n} Q_k(y), T2 = (1/r^2) sum_{k=1..n} (n-k+1) Q_k(y),
  // with Q_k(y) = P(Poisson(y) < k).
  double t1(double x) const {
    const double y = rate * x;
    double q = 0.0;
    double sum = 0.0;
    for (int k = 1; k <= shape; ++k) {
      q += poisson_pmf(k - 1, y);
      sum += q;
    }
    return sum / rate;
  }
  double t2(double x) const {
    const double y = rate * x;
    double q = 0.0;
    double sum = 0.0;
    for (int k = 1; k <= shape; ++k) {
      q += poisson_pmf(k - 1, y);
      sum += (shape - k + 1) * q;
    }
    return sum / (rate * rate);
  }
  std::optional<double> mean() const { return shape / rate; }
  double upper() const { return detail::kInf; }
  double mode() const { return (shape - 1) / rate; }
  std::vector<double> breakpoints() const {
    if (shape == 1) return {0.0};
    return {0.0, mode()};
  }
  int trend(double lo, double hi) const {
    if (hi <= 0.0) return 0;
    if (shape > 1 && hi <= mode()) return 1;
    return -1;
  }
  template <class Rng>
  double sample(Rng& rng) const {
    std::exponential_distribution<double> exp(rate);
    double s = 0.0;
    for (int k = 0; k < shape; ++k) s += exp(rng);
    return s;
  }

 private:
  static double poisson_pmf(int k, double y) {
    if (y <= 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(-y + k * std::log(y) - std::lgamma(k + 1.0));
  }
};

struct Pareto {
  double x_min;
  double alpha;

  double cdf(double x) const { return x < x_min ? 0.0 : -std::expm1(-alpha * std::log(x / x_min)); }
  double survival(double x) const { return x < x_min ? 1.0 : std::pow(x_min / x, alpha); }
  double g1(double x) const {
    if (x <= x_min) return 0.0;
    const double u = x / x_min;
    return x_min * ((u - 1) - detail::pow_minus_one_over(u, 1 - alpha));
  }
  double g2(double x) const {
    if (x <= x_min) return 0.0;
    const double u = x / x_min;
    const double sq = 0.5 * (u - 1) * (u - 1);
    if (std::abs(alpha - 1) < 1e-9) return x_min * x_min * (sq - (u * std::log(u) - u + 1));
    return x_min * x_min *
           (sq - (detail::pow_minus_one_over(u, 2 - alpha) - (u - 1)) / (1 - alpha));
  }
  double t1(double x) const {
    if (alpha <= 1) return detail::kInf;
    const double at_min = x_min / (alpha - 1);
    if (x < x_min) return (x_min - x) + at_min;
    return at_min * std::pow(x / x_min, 1 - alpha);
  }
  double t2(double x) const {
    if (alpha <= 2) return detail::kInf;
    const double at_min = x_min * x_min / ((alpha - 1) * (alpha - 2));
    if (x < x_min) {
      const double d = x_min - x;
      return at_min + d * d / 2 + d * x_min / (alpha - 1);
    }
    return at_min * std::pow(x / x_min, 2 - alpha);
  }
  std::optional<double> mean() const {
    if (alpha <= 1) return std::nullopt;
    return alpha * x_min / (alpha - 1);
  }
  double upper() const { return detail::kInf; }
  std::vector<double> breakpoints() const { return {0.0, x_min}; }
  int trend(double lo, double) const { return lo >= x_min ? -1 : 0; }
  template <class Rng>
  double sample(Rng& rng) const {
    // 1 - U lies in (0, 1], so the power is finite.
    const double u = 1.0 - std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return x_min * std::pow(u, -1.0 / alpha);
  }
};

struct Deterministic {
  double value;

  double cdf(double x) const { return x >= value ? 1.0 : 0.0; }
  double survival(double x) const { return x >= value ? 0.0 : 1.0; }
  double g1(double x) const { return std::max(0.0, x - value); }
  double g2(double x) const {
    const double d = std::max(0.0, x - value);
    return d * d / 2;
  }
  double t1(double x) const { return std::max(0.0, value - x); }
  double t2(double x) const {
    const double d = std::max(0.0, value - x);
    return d * d / 2;
  }
  std::optional<double> mean() const { return value; }
  double upper() const { return value; }
  std::vector<double> breakpoints() const { return {value}; }
  int trend(double, double) const { return 0; }
  template <class Rng>
  double sample(Rng&) const {
    return value;
  }
};

/// Piecewise-linear CDF through user-supplied knots (x_k, F_k). Repeated x
/// values encode jumps; the CDF is right-continuous and 0 before the first
/// knot, 1 from the last knot on.
class Tabulated {
 public:
  struct Segment {
    double a, b;    // b > a
    double fa, fb;  // right limit at a, left limit at b
    double g1a, g2a;
  };

  Tabulated(std::vector<double> x, std::vector<double> f) : x_(std::move(x)), f_(std::move(f)) {
    if (x_.size() != f_.size() || x_.empty())
      throw DomainError("tabulated CDF needs matching, non-empty knot arrays");
    if (x_.front() < 0) throw DomainError("tabulated CDF must be supported on [0, inf)");
    for (std::size_t k = 0; k < x_.size(); ++k) {
      if (!(f_[k] >= 0.0 && f_[k] <= 1.0)) throw DomainError("tabulated CDF values must lie in [0,1]");
      if (k > 0 && (x_[k] < x_[k - 1] || f_[k] < f_[k - 1]))
        throw DomainError("tabulated CDF knots must be non-decreasing");
    }
    if (f_.back() != 1.0) throw DomainError("tabulated CDF must reach 1 at its last knot");
    double g1 = 0.0;
    double g2 = 0.0;
    for (std::size_t k = 0; k + 1 < x_.size(); ++k) {
      if (!(x_[k + 1] > x_[k])) continue;
      Segment s{x_[k], x_[k + 1], f_[k], f_[k + 1], g1, g2};
      const double d = s.b - s.a;
      const double sl = (s.fb - s.fa) / d;
      g2 += g1 * d + s.fa * d * d / 2 + sl * d * d * d / 6;
      g1 += s.fa * d + sl * d * d / 2;
      segments_.push_back(s);
    }
    g1_end_ = g1;
    g2_end_ = g2;
  }

  const std::vector<double>& knots_x() const { return x_; }
  const std::vector<double>& knots_f() const { return f_; }

  double cdf(double x) const {
    if (x < x_.front()) return 0.0;
    if (x >= x_.back()) return 1.0;
    const Segment* s = find(x);
    if (s == nullptr) return f_.front();
    return s->fa + (s->fb - s->fa) * (x - s->a) / (s->b - s->a);
  }
  double survival(double x) const { return 1.0 - cdf(x); }
  double g1(double x) const {
    if (x <= x_.front()) return 0.0;
    if (x >= x_.back()) return g1_end_ + (x - x_.back());
    const Segment* s = find(x);
    const double d = x - s->a;
    const double sl = (s->fb - s->fa) / (s->b - s->a);
    return s->g1a + s->fa * d + sl * d * d / 2;
  }
  double g2(double x) const {
    if (x <= x_.front()) return 0.0;
    if (x >= x_.back()) {
      const double d = x - x_.back();
      return g2_end_ + g1_end_ * d + d * d / 2;
    }
    const Segment* s = find(x);
    const double d = x - s->a;
    const double sl = (s->fb - s->fa) / (s->b - s->a);
    return s->g2a + s->g1a * d + s->fa * d * d / 2 + sl * d * d * d / 6;
  }
  double t1(double x) const {
    const double last = x_.back();
    if (x >= last) return 0.0;
    return (last - x) - (g1_end_ - g1(x));
  }
  double t2(double x) const {
    const double last = x_.back();
    if (x >= last) return 0.0;
    const double d = last - x;
    return d * d / 2 - g1_end_ * d + g2_end_ - g2(x);
  }
  std::optional<double> mean() const { return t1(0.0); }
  double upper() const { return x_.back(); }
  std::vector<double> breakpoints() const {
    std::vector<double> b = x_;
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }
  int trend(double, double) const { return 0; }
  template <class Rng>
  double sample(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u <= f_.front()) return x_.front();
    for (const Segment& s : segments_) {
      if (u <= s.fb) {
        if (u <= s.fa) return s.a;
        return s.a + (u - s.fa) / (s.fb - s.fa) * (s.b - s.a);
      }
    }
    return x_.back();
  }

 private:
  const Segment* find(double x) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), x,
                               [](double v, const Segment& s) { return v < s.a; });
    if (it == segments_.begin()) return nullptr;
    return &*std::prev(it);
  }

  std::vector<double> x_;
  std::vector<double> f_;
  std::vector<Segment> segments_;
  double g1_end_ = 0.0;
  double g2_end_ = 0.0;
};

/// Arbitrary non-decreasing CDF supported on [0, upper]. Integrals are
/// evaluated numerically with rigorous enclosures, and the enclosure widths
/// are reported as Estimate::error.
struct Custom {
  std::function<double(double)> cdf_fn;
  double upper_bound;
  double tolerance = 1e-7;

  double cdf(double x) const {
    if (x < 0) return 0.0;
    if (x >= upper_bound) return 1.0;
    return cdf_fn(x);
  }
  template <class Rng>
  double sample(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double lo = 0.0;
    double hi = upper_bound;
    if (cdf(0.0) >= u) return 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) >= u ? hi : lo) = mid;
    }
    return hi;
  }
};

}  // namespace family

/// A job-size law B on [0, inf).
class JobSize {
 public:
  using Variant = std::variant<family::Uniform, family::Exponential, family::Erlang,
                               family::Pareto, family::Deterministic, family::Tabulated,
                               family::Custom>;

  static JobSize uniform(double lo, double hi) {
    if (!(lo >= 0 && hi > lo && std::isfinite(hi))) throw DomainError("uniform job size needs 0 <= lo < hi");
    return JobSize(family::Uniform{lo, hi});
  }
  static JobSize exponential(double rate) {
    if (!(rate > 0 && std::isfinite(rate))) throw DomainError("exponential job size needs rate > 0");
    return JobSize(family::Exponential{rate});
  }
  static JobSize erlang(int shape, double rate) {
    if (shape < 1) throw DomainError("erlang job size needs a positive integer shape");
    if (!(rate > 0 && std::isfinite(rate))) throw DomainError("erlang job size needs rate > 0");
    return JobSize(family::Erlang{shape, rate});
  }
  static JobSize pareto(double x_min, double alpha) {
    if (!(x_min > 0 && alpha > 0 && std::isfinite(x_min) && std::isfinite(alpha)))
      throw DomainError("pareto job size needs x_min > 0 and alpha > 0");
    return JobSize(family::Pareto{x_min, alpha});
  }
  static JobSize deterministic(double value) {
    if (!(value >= 0 && std::isfinite(value))) throw DomainError("deterministic job size needs value >= 0");
    return JobSize(family::Deterministic{value});
  }
  static JobSize tabulated(std::vector<double> x, std::vector<double> f) {
    return JobSize(family::Tabulated(std::move(x), std::move(f)));
  }
  static JobSize custom(std::function<double(double)> cdf, double upper_bound,
                        double tolerance = 1e-7) {
    if (!(upper_bound > 0 && std::isfinite(upper_bound)))
      throw DomainError("custom job size needs a finite support bound");
    return JobSize(family::Custom{std::move(cdf), upper_bound, tolerance});
  }

  const Variant& variant() const { return v_; }
  bool has_closed_form() const { return !std::holds_alternative<family::Custom>(v_); }

  double cdf(double x) const {
    if (x < 0) return 0.0;
    return std::visit([x](const auto& f) { return f.cdf(x); }, v_);
  }

  double survival(double x) const {
    if (x < 0) return 1.0;
    return std::visit(
        [x](const auto& f) {
          if constexpr (requires { f.survival(x); }) return f.survival(x);
          else return 1.0 - f.cdf(x);
        },
        v_);
  }

  /// Supremum of the support (+inf for unbounded families).
  double support_upper() const {
    return std::visit(
        [](const auto& f) {
          if constexpr (requires { f.upper(); }) return f.upper();
          else return f.upper_bound;
        },
        v_);
  }

  /// E[B], or nullopt when the first moment is infinite.
  std::optional<double> mean() const {
    if (auto* c = std::get_if<family::Custom>(&v_)) {
      const Estimate e = numeric_cdf_integral(*c, 0.0, c->upper_bound);
      return c->upper_bound - e.value + e.error;
    }
    return t1(0.0) < detail::kInf ? std::optional<double>(t1(0.0)) : std::nullopt;
  }

  /// Integral of x dF_B over (a, inf) for a >= 0; nullopt iff the mean is
  /// infinite. Numeric families return an upper bound.
  std::optional<double> tail_mean(double a) const {
    if (a < 0) throw DomainError("tail_mean needs a >= 0");
    if (auto* c = std::get_if<family::Custom>(&v_)) {
      if (a >= c->upper_bound) return 0.0;
      const Estimate e = numeric_cdf_integral(*c, a, c->upper_bound);
      return a * (1.0 - c->cdf(a)) + (c->upper_bound - a) - e.value + e.error;
    }
    const double t = t1(a);
    if (!(t < detail::kInf)) return std::nullopt;
    return a * survival(a) + t;
  }

  /// Integral of F_B over [a, b].
  Estimate cdf_integral(double a, double b) const {
    check_order(a, b);
    if (auto* c = std::get_if<family::Custom>(&v_)) return numeric_cdf_integral(*c, a, b);
    if (use_tail(a, false)) return {(b - a) - (t1(a) - t1(b)), 0.0};
    return {g1(b) - g1(a), 0.0};
  }

  /// Integral of 1 - F_B over [a, b].
  Estimate survival_integral(double a, double b) const {
    check_order(a, b);
    if (auto* c = std::get_if<family::Custom>(&v_)) {
      const Estimate e = numeric_cdf_integral(*c, a, b);
      return {(b - a) - e.value, e.error};
    }
    if (use_tail(a, false)) return {t1(a) - t1(b), 0.0};
    return {(b - a) - (g1(b) - g1(a)), 0.0};
  }

  /// Integral over [a, a + delta] of F_B(s + delta) - F_B(s).
  Estimate window_integral(double a, double delta) const {
    if (auto* c = std::get_if<family::Custom>(&v_)) {
      Estimate e = numeric_cdf_integral(*c, a + delta, a + 2 * delta) -
                   numeric_cdf_integral(*c, a, a + delta);
      e.value = std::max(0.0, e.value);
      return e;
    }
    double v;
    if (use_tail(a, false)) v = t1(a) - 2 * t1(a + delta) + t1(a + 2 * delta);
    else v = g1(a + 2 * delta) - 2 * g1(a + delta) + g1(a);
    return {std::max(0.0, v), 0.0};
  }

  /// Integral over [lo, hi] of (c - s) F_B(s).
  Estimate moment_integral(double lo, double hi, double c) const {
    check_order(lo, hi);
    if (auto* cu = std::get_if<family::Custom>(&v_)) return numeric_moment_integral(*cu, lo, hi, c);
    if (use_tail(lo, true)) {
      return {(hi - lo) * (c - 0.5 * (lo + hi)) - (c - lo) * t1(lo) + (c - hi) * t1(hi) + t2(lo) -
                  t2(hi),
              0.0};
    }
    return {(c - hi) * g1(hi) - (c - lo) * g1(lo) + g2(hi) - g2(lo), 0.0};
  }

  /// Integral over [a, b] of (c - s)(F_B(s + delta) - F_B(s)).
  Estimate weighted_cdf_diff_integral(double delta, double a, double b, double c) const {
    check_order(a, b);
    if (a == b) return {};
    if (auto* cu = std::get_if<family::Custom>(&v_)) {
      return numeric_moment_integral(*cu, a + delta, b + delta, c + delta) -
             numeric_moment_integral(*cu, a, b, c);
    }
    if (use_tail(a, true)) {
      auto vt = [this](double lo, double hi, double cc) {
        return (cc - lo) * t1(lo) - (cc - hi) * t1(hi) - t2(lo) + t2(hi);
      };
      return {vt(a, b, c) - vt(a + delta, b + delta, c + delta), 0.0};
    }
    auto mg = [this](double lo, double hi, double cc) {
      return (cc - hi) * g1(hi) - (cc - lo) * g1(lo) + g2(hi) - g2(lo);
    };
    return {mg(a + delta, b + delta, c + delta) - mg(a, b, c), 0.0};
  }

  /// Integral over y in [u, v] of (integral of F_B over [y - delta, y]).
  /// Closed-form families only.
  double shifted_window_integral(double u, double v, double delta) const {
    require_closed_form("shifted_window_integral");
    if (use_tail(u - delta, true))
      return delta * (v - u) + (t2(u) - t2(v)) - (t2(u - delta) - t2(v - delta));
    return (g2(v) - g2(u)) - (g2(v - delta) - g2(u - delta));
  }

  /// Integral over s in [a, a + delta] of (integral of 1 - F_B over
  /// [s, s + delta]). Closed-form families only.
  double survival_window2(double a, double delta) const {
    require_closed_form("survival_window2");
    double v;
    if (use_tail(a, true)) v = t2(a) - 2 * t2(a + delta) + t2(a + 2 * delta);
    else v = delta * delta - (g2(a + 2 * delta) - 2 * g2(a + delta) + g2(a));
    return std::max(0.0, v);
  }

  /// Points where the density of B may change monotonicity or jump
  /// (including 0 and atoms).
  std::vector<double> density_breakpoints() const {
    std::vector<double> b = std::visit(
        [](const auto& f) {
          if constexpr (requires { f.breakpoints(); }) return f.breakpoints();
          else return std::vector<double>{0.0, f.upper_bound};
        },
        v_);
    b.push_back(0.0);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

  /// Monotonicity of the density on the open interval (lo, hi): +1
  /// non-decreasing, -1 non-increasing, 0 constant; nullopt when a breakpoint
  /// lies strictly inside or the family gives no shape information.
  std::optional<int> density_trend(double lo, double hi) const {
    if (!has_closed_form()) return std::nullopt;
    for (double b : density_breakpoints())
      if (b > lo && b < hi) return std::nullopt;
    if (hi <= 0.0) return 0;
    return std::visit(
        [lo, hi](const auto& f) -> int {
          if constexpr (requires { f.trend(lo, hi); }) return f.trend(lo, hi);
          else return 0;
        },
        v_);
  }

  template <class Rng>
  double sample(Rng& rng) const {
    return std::visit([&rng](const auto& f) { return f.sample(rng); }, v_);
  }

  std::string family_name() const {
    static constexpr const char* names[] = {"uniform",       "exponential", "erlang", "pareto",
                                            "deterministic", "tabulated",   "custom"};
    return names[v_.index()];
  }

  // Antiderivatives for x of any sign. g1, g2 integrate F from 0; t1, t2
  // integrate the survival function (and t1) to +inf and may be +inf.
  double g1(double x) const {
    if (x <= 0) return 0.0;
    return visit_closed([x](const auto& f) { return f.g1(x); });
  }
  double g2(double x) const {
    if (x <= 0) return 0.0;
    return visit_closed([x](const auto& f) { return f.g2(x); });
  }
  double t1(double x) const {
    if (x < 0) return t1(0.0) - x;
    return visit_closed([x](const auto& f) { return f.t1(x); });
  }
  double t2(double x) const {
    if (x < 0) {
      const double a = t1(0.0);
      return t2(0.0) + a * (-x) + x * x / 2;
    }
    return visit_closed([x](const auto& f) { return f.t2(x); });
  }

 private:
  explicit JobSize(Variant v) : v_(std::move(v)) {}

  template <class Fn>
  double visit_closed(Fn&& fn) const {
    return std::visit(
        [&fn](const auto& f) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(f)>, family::Custom>) {
            throw std::logic_error("antiderivatives need a closed-form job size family");
          } else {
            return fn(f);
          }
        },
        v_);
  }

  void require_closed_form(const char* what) const {
    if (!has_closed_form())
      throw std::logic_error(std::string(what) + " needs a closed-form job size family");
  }

  static void check_order(double a, double b) {
    if (!(a <= b)) throw DomainError("integral bounds are reversed");
  }

  // Tail form is used once F has passed 1/2 at the left-most argument, which
  // keeps the combined terms small in the upper tail.
  bool use_tail(double x, bool second_order) const {
    if (cdf(x) < 0.5) return false;
    return second_order ? t2(x) < detail::kInf : t1(x) < detail::kInf;
  }

  static Estimate numeric_cdf_integral(const family::Custom& c, double a, double b) {
    Estimate out;
    const double lo = std::max(a, 0.0);
    const double hi = std::min(b, c.upper_bound);
    if (hi > lo) out += integrate_monotone([&c](double x) { return c.cdf(x); }, lo, hi, c.tolerance);
    const double ones = b - std::max(a, c.upper_bound);
    if (ones > 0) out.value += ones;
    return out;
  }

  static Estimate numeric_moment_integral(const family::Custom& c, double lo, double hi,
                                          double w) {
    Estimate out;
    const double a = std::max(lo, 0.0);
    const double b = std::min(hi, c.upper_bound);
    if (b > a) {
      out += integrate_enclosed(
          [&](double u, double v) {
            const double fu = c.cdf(u), fv = c.cdf(v);
            const double corners[] = {(w - u) * fu, (w - u) * fv, (w - v) * fu, (w - v) * fv};
            return Bracket{*std::min_element(std::begin(corners), std::end(corners)),
                           *std::max_element(std::begin(corners), std::end(corners))};
          },
          a, b, c.tolerance);
    }
    const double s = std::max(lo, c.upper_bound);
    if (hi > s) out.value += (hi - s) * (w - 0.5 * (hi + s));
    return out;
  }

  Variant v_;
};

}  // namespace qtrans
