#pragma once

// Independent reference computations used by the tests: adaptive
// Gauss-Kronrod quadrature, Riemann sums, dense matrix products, quantile
// couplings and small random generators.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "qtrans/job_size.hpp"
#include "qtrans/measure.hpp"

namespace oracle {

struct Quad {
  double value = 0.0;
  double error = 0.0;
};

/// Gauss-Kronrod on [a, b], split at the given points.
inline Quad gk(const std::function<double(double)>& f, double a, double b, std::vector<double> splits = {}) {
  Quad q;
  if (!(b > a)) return q;
  std::vector<double> pts{a};
  std::sort(splits.begin(), splits.end());
  for (double s : splits)
    if (s > a && s < b) pts.push_back(s);
  pts.push_back(b);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    double err = 0.0;
    q.value += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, pts[k], pts[k + 1], 12, 1e-12, &err);
    q.error += err;
  }
  return q;
}

/// Midpoint Riemann sum with step h.
inline double riemann(const std::function<double(double)>& f, double a, double b, double h) {
  const long n = std::max(1L, std::lround((b - a) / h));
  const double step = (b - a) / n;
  long double s = 0.0L;
  for (long k = 0; k < n; ++k) s += f(a + (k + 0.5) * step);
  return static_cast<double>(s * step);
}

/// Direct density of the job-size law on smooth parts (0 at atoms).
inline double density(const qtrans::JobSize& j, double x) {
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  return (j.cdf(x + h) - j.cdf(x - h)) / (2 * h);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g_); }
  bool coin() { return integer(0, 1) == 1; }
  std::mt19937_64& engine() { return g_; }

 private:
  std::mt19937_64 g_;
};

/// A random closed-form job-size law.
inline qtrans::JobSize random_job(Rng& r, bool allow_heavy = true) {
  switch (r.integer(0, allow_heavy ? 5 : 4)) {
    case 0: {
      const double lo = r.uniform(0.0, 3.0);
      return qtrans::JobSize::uniform(lo, lo + r.uniform(0.1, 4.0));
    }
    case 1: return qtrans::JobSize::exponential(r.uniform(0.2, 3.0));
    case 2: return qtrans::JobSize::erlang(r.integer(1, 12), r.uniform(0.5, 4.0));
    case 3: return qtrans::JobSize::deterministic(r.uniform(0.0, 4.0));
    case 4: {
      std::vector<double> x{r.uniform(0.0, 1.0)};
      std::vector<double> f{r.coin() ? 0.0 : r.uniform(0.0, 0.3)};
      const int n = r.integer(1, 5);
      for (int k = 0; k < n; ++k) {
        x.push_back(x.back() + (r.integer(0, 4) == 0 ? 0.0 : r.uniform(0.1, 1.5)));
        f.push_back(k + 1 == n ? 1.0 : std::min(1.0, f.back() + r.uniform(0.0, 0.4)));
      }
      return qtrans::JobSize::tabulated(x, f);
    }
    default: return qtrans::JobSize::pareto(r.uniform(0.3, 2.0), r.uniform(allow_heavy ? 0.7 : 1.2, 4.0));
  }
}

/// W1 between two discrete laws by the sort-and-pair quantile coupling.
inline double quantile_coupling(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double ra = a.empty() ? 0 : a[0].second, rb = b.empty() ? 0 : b[0].second;
  double cost = 0.0;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(ra, rb);
    cost += m * std::abs(a[i].first - b[j].first);
    ra -= m;
    rb -= m;
    if (ra <= 1e-15 && ++i < a.size()) ra = a[i].second;
    if (rb <= 1e-15 && ++j < b.size()) rb = b[j].second;
  }
  return cost;
}

/// y = x^T A for a row-major square matrix.
inline std::vector<double> vec_mat(const std::vector<double>& x, const std::vector<double>& a) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j] += x[i] * a[i * n + j];
  return y;
}

}  // namespace oracle
