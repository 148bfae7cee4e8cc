#pragma once

// Discrete transition kernels P = P_check + D for the M/G/1 workload and the
// spectrally negative compound Poisson queue. Generic rows (M/G/1, i >= 2)
// and generic columns (spectrally negative, j >= 2) depend only on the index
// difference and are stored once as a band; the few remaining rows/columns
// are stored explicitly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include "qtrans/convolution.hpp"
#include "qtrans/error.hpp"
#include "qtrans/job_size.hpp"
#include "qtrans/measure.hpp"

namespace qtrans {

enum class ProcessKind { mg1, spectrally_negative };

/// Compound Poisson input with rate lambda and jump law `job`; unit drift.
struct ModelSpec {
  ProcessKind kind = ProcessKind::mg1;
  double lambda = 1.0;
  JobSize job = JobSize::deterministic(0.0);
  bool absorbing_zero = false;

  void validate() const {
    if (!(lambda > 0 && std::isfinite(lambda))) throw DomainError("arrival rate must be positive");
    if (kind == ProcessKind::mg1 && absorbing_zero)
      throw DomainError("absorbing zero only applies to the spectrally negative queue");
  }

  /// Whether the model keeps a state for the point 0.
  bool has_zero_state() const { return kind == ProcessKind::mg1 || absorbing_zero; }

  Grid grid(double delta, int m_delta) const { return Grid(delta, m_delta, has_zero_state()); }
};

/// Rescales a model served at speed r to unit speed: Q/r has unit drift and
/// jumps B/r. Workload results of the unit-speed model scale back by r.
inline ModelSpec normalize_speed(const ModelSpec& spec, double r) {
  if (!(r > 0 && std::isfinite(r))) throw DomainError("service speed must be positive");
  if (r == 1.0) return spec;
  ModelSpec out = spec;
  const JobSize job = spec.job;
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, family::Uniform>) out.job = JobSize::uniform(f.lo / r, f.hi / r);
        else if constexpr (std::is_same_v<T, family::Exponential>) out.job = JobSize::exponential(f.rate * r);
        else if constexpr (std::is_same_v<T, family::Erlang>) out.job = JobSize::erlang(f.shape, f.rate * r);
        else if constexpr (std::is_same_v<T, family::Pareto>) out.job = JobSize::pareto(f.x_min / r, f.alpha);
        else if constexpr (std::is_same_v<T, family::Deterministic>) out.job = JobSize::deterministic(f.value / r);
        else if constexpr (std::is_same_v<T, family::Tabulated>) {
          std::vector<double> x = f.knots_x();
          for (double& v : x) v /= r;
          out.job = JobSize::tabulated(std::move(x), f.knots_f());
        } else {
          out.job = JobSize::custom([cdf = f.cdf_fn, r](double x) { return cdf(x * r); },
                                    f.upper_bound / r, f.tolerance);
        }
      },
      job.variant());
  return out;
}

class TransitionKernel {
 public:
  /// Bands up to this length are applied with a direct loop, longer ones by
  /// FFT convolution.
  static constexpr std::size_t kDirectBandLimit = 64;

  static TransitionKernel build(const ModelSpec& spec, const Grid& grid) {
    spec.validate();
    if (grid.zero_state != spec.has_zero_state())
      throw DomainError(spec.kind == ProcessKind::mg1
                            ? "M/G/1 grids need a zero state"
                            : "grid zero state does not match the absorbing_zero flag");
    TransitionKernel k;
    k.spec_ = spec;
    k.grid_ = grid;
    k.e_ = std::exp(-spec.lambda * grid.delta);
    const double upper = spec.job.support_upper();
    const double reach = std::ceil(upper / grid.delta);
    k.kmax_ = std::isfinite(reach) ? static_cast<int>(std::min<double>(reach, grid.m_delta))
                                   : grid.m_delta;
    k.build_band();
    if (spec.kind == ProcessKind::mg1) k.build_mg1_specials();
    else k.build_specneg_specials();
    k.build_diag();
    k.prepare_apply(kDirectBandLimit);
    return k;
  }

  const ModelSpec& spec() const { return spec_; }
  const Grid& grid() const { return grid_; }
  ProcessKind kind() const { return spec_.kind; }
  double no_jump_probability() const { return e_; }
  int kmax() const { return kmax_; }

  /// band()[k + 1] is the generic entry at offset k = j - i (M/G/1) or
  /// k = i - j (spectrally negative), k = -1..kmax.
  const std::vector<double>& band() const { return band_; }
  const std::vector<double>& special_row(int i) const { return rows_.at(i); }
  const std::vector<double>& first_column() const { return col1_; }
  const std::vector<double>& zero_column() const { return col0_; }
  const std::vector<double>& diag() const { return diag_; }
  /// Bound on the summed absolute quadrature error of each row of P_check.
  const std::vector<double>& row_error() const { return row_error_; }
  bool has_quadrature_error() const { return any_error_; }

  /// Entry of P_check.
  double check_entry(int i, int j) const {
    const int n = grid_.m_delta;
    if (i < grid_.first_state() || j < grid_.first_state() || i > n || j > n) return 0.0;
    if (spec_.kind == ProcessKind::mg1) {
      if (i <= 1) return rows_[i][j];
      return band_at(j - i);
    }
    if (i == 0) return j == 0 ? 1.0 : 0.0;
    if (j == 0) return col0_[i];
    if (j == 1) return col1_[i];
    return band_at(i - j);
  }

  /// Entry of P = P_check + D.
  double entry(int i, int j) const { return check_entry(i, j) + (i == j ? diag_[i] : 0.0); }

  /// Row-major dense P over states 0..m_delta (unused state 0 gives a zero
  /// row and column).
  std::vector<double> dense() const {
    const std::size_t n = grid_.size();
    std::vector<double> out(n * n, 0.0);
    for (int i = grid_.first_state(); i <= grid_.m_delta; ++i)
      for (int j = grid_.first_state(); j <= grid_.m_delta; ++j) out[i * n + j] = entry(i, j);
    return out;
  }

  /// One step p^T P. If `rounding` is given, a bound on the L1 rounding
  /// error of the result is added to it.
  DiscreteDist apply(const DiscreteDist& p, double* rounding = nullptr) const {
    if (!(p.grid == grid_) || p.p.size() != grid_.size())
      throw DomainError("distribution and kernel live on different grids");
    const int n = grid_.m_delta;
    DiscreteDist q(grid_);
    std::vector<double>& out = q.p;
    double err = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();
    const double direct_gamma = (band_.size() + 4) * eps * 1.01;

    if (spec_.kind == ProcessKind::mg1) {
      for (int r = 0; r <= 1 && r <= n; ++r) {
        const double w = p.p[r];
        if (w == 0) continue;
        const auto& row = rows_[r];
        for (int j = 0; j <= n; ++j) out[j] += w * row[j];
      }
      if (conv_) {
        std::vector<double> x(p.p);
        x[0] = 0.0;
        if (n >= 1) x[1] = 0.0;
        const std::vector<double> c = conv_->convolve(x, &err);
        for (int j = 0; j <= n; ++j) out[j] += c[j + 1];
        for (int j = 1; j < n; ++j) out[j] += e_ * x[j + 1];
      } else {
        for (int i = 2; i <= n; ++i) {
          const double w = p.p[i];
          if (w == 0) continue;
          const int jhi = std::min(n, i + kmax_);
          for (int j = i - 1; j <= jhi; ++j) out[j] += w * band_[j - i + 1];
        }
      }
    } else {
      if (spec_.absorbing_zero) out[0] += p.p[0];
      double s1 = 0.0;
      double s0 = 0.0;
      for (int i = 1; i <= n; ++i) {
        s1 += p.p[i] * col1_[i];
        if (spec_.absorbing_zero) s0 += p.p[i] * col0_[i];
      }
      out[1] += s1;
      if (spec_.absorbing_zero) out[0] += s0;
      if (conv_) {
        std::vector<double> r(n, 0.0);
        for (int i = 1; i <= n; ++i) r[n - i] = p.p[i];
        const std::vector<double> c = conv_->convolve(r, &err);
        for (int j = 2; j <= n; ++j) out[j] += c[n - j + 1] + e_ * p.p[j - 1];
      } else {
        for (int i = 1; i <= n; ++i) {
          const double w = p.p[i];
          if (w == 0) continue;
          const int jlo = std::max(2, i - kmax_);
          const int jhi = std::min(n, i + 1);
          for (int j = jlo; j <= jhi; ++j) out[j] += w * band_[i - j + 1];
        }
      }
    }
    for (int i = grid_.first_state(); i <= n; ++i) out[i] += p.p[i] * diag_[i];
    for (double& v : out) v = std::max(v, 0.0);
    if (!grid_.zero_state) out[0] = 0.0;
    if (rounding != nullptr) *rounding += err + direct_gamma;
    return q;
  }

  /// Forces the direct or FFT apply path (for testing both).
  void set_direct_band_limit(std::size_t limit) { prepare_apply(limit); }

 private:
  TransitionKernel() = default;

  double band_at(int k) const {
    if (k < -1 || k > kmax_) return 0.0;
    return band_[k + 1];
  }

  void build_band() {
    const double d = grid_.delta;
    const double el = e_ * spec_.lambda;
    band_.assign(kmax_ + 2, 0.0);
    band_error_.assign(kmax_ + 2, 0.0);
    for (int k = -1; k <= kmax_; ++k) {
      const Estimate w = spec_.job.window_integral(k * d, d);
      band_[k + 1] = el * w.value + (k == -1 ? e_ : 0.0);
      band_error_[k + 1] = el * w.error;
    }
    band_error_total_ = 0.0;
    for (double v : band_error_) band_error_total_ += v;
  }

  void build_mg1_specials() {
    const int n = grid_.m_delta;
    const double d = grid_.delta;
    const double el = e_ * spec_.lambda;
    const int jmax = std::min(n, kmax_ + 1);
    rows_.assign(2, std::vector<double>(n + 1, 0.0));
    row_error_.assign(n + 1, band_error_total_);
    row_error_[0] = 0.0;
    // Row 0: an arrival at a uniform time lands on an empty queue.
    for (int j = 0; j <= jmax; ++j) {
      const Estimate w = spec_.job.window_integral((j - 1) * d, d);
      rows_[0][j] = el * w.value + (j == 0 ? e_ : 0.0);
      row_error_[0] += el * w.error;
    }
    // Row 1: the idle time before the arrival makes the weight triangular.
    if (n >= 1) {
      row_error_[1] = 0.0;
      for (int j = 0; j <= jmax; ++j) {
        const Estimate w = spec_.job.weighted_cdf_diff_integral(d, (j - 1) * d, j * d, j * d);
        rows_[1][j] = std::max(0.0, 2.0 * el / d * w.value) + (j == 0 ? e_ : 0.0);
        row_error_[1] += 2.0 * el / d * w.error;
      }
    }
  }

  void build_specneg_specials() {
    const int n = grid_.m_delta;
    const double d = grid_.delta;
    const double el = e_ * spec_.lambda;
    col1_.assign(n + 1, 0.0);
    col0_.assign(n + 1, 0.0);
    row_error_.assign(n + 1, band_error_total_);
    row_error_[0] = 0.0;
    for (int i = 1; i <= n; ++i) {
      const Estimate s = spec_.job.survival_integral((i - 1) * d, i * d);
      col1_[i] = el * s.value;
      row_error_[i] += el * s.error;
      if (spec_.absorbing_zero) {
        // Paths whose jump reaches 0 stay there instead of drifting back up.
        col0_[i] = std::min(col1_[i], el / d * spec_.job.survival_window2((i - 1) * d, d));
        col1_[i] = std::max(0.0, col1_[i] - col0_[i]);
      }
    }
  }

  void build_diag() {
    const int n = grid_.m_delta;
    diag_.assign(n + 1, 0.0);
    // prefix[m] = sum of band_[0..m-1]
    std::vector<long double> prefix(band_.size() + 1, 0.0L);
    for (std::size_t m = 0; m < band_.size(); ++m) prefix[m + 1] = prefix[m] + band_[m];
    auto band_sum = [&](int k0, int k1) -> long double {
      k0 = std::max(k0, -1);
      k1 = std::min(k1, kmax_);
      if (k1 < k0) return 0.0L;
      return prefix[k1 + 2] - prefix[k0 + 1];
    };
    for (int i = grid_.first_state(); i <= n; ++i) {
      long double s = 0.0L;
      if (spec_.kind == ProcessKind::mg1) {
        if (i <= 1) {
          for (double v : rows_[i]) s += v;
        } else {
          s = band_sum(-1, n - i);
        }
      } else if (i == 0) {
        s = 1.0L;
      } else {
        s = band_sum(i - n, i - 2) + col1_[i] + col0_[i];
      }
      diag_[i] = std::max(0.0, static_cast<double>(1.0L - s));
    }
    any_error_ = false;
    for (double v : row_error_) any_error_ = any_error_ || v > 0;
  }

  void prepare_apply(std::size_t direct_limit) {
    conv_.reset();
    if (band_.size() > direct_limit) {
      const std::size_t len = spec_.kind == ProcessKind::mg1 ? grid_.size() : grid_.size() - 1;
      // The no-jump shift dominates the band; it is applied exactly and only
      // the small jump part goes through the FFT.
      std::vector<double> jumps = band_;
      jumps[0] -= e_;
      conv_ = std::make_shared<const Convolver>(jumps, len);
    }
  }

  ModelSpec spec_;
  Grid grid_;
  double e_ = 1.0;
  int kmax_ = 0;
  std::vector<double> band_;
  std::vector<double> band_error_;
  double band_error_total_ = 0.0;
  std::vector<std::vector<double>> rows_;
  std::vector<double> col1_;
  std::vector<double> col0_;
  std::vector<double> diag_;
  std::vector<double> row_error_;
  bool any_error_ = false;
  std::shared_ptr<const Convolver> conv_;
};

}  // namespace qtrans
