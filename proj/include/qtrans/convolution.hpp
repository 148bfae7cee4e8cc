#pragma once

// Linear convolution of a signal with a fixed real filter through FFTW.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <new>
#include <vector>

namespace qtrans {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using fftw_buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
fftw_buffer<T> fftw_alloc(std::size_t n) {
  void* p = fftw_malloc(sizeof(T) * n);
  if (p == nullptr) throw std::bad_alloc();
  return fftw_buffer<T>(static_cast<T*>(p));
}

/// Smallest n >= target whose prime factors are all in {2, 3, 5, 7}.
inline std::size_t smooth_size(std::size_t target) {
  std::size_t best = 1;
  while (best < target) best *= 2;
  for (std::size_t a = 1; a < best; a *= 7)
    for (std::size_t b = a; b < best; b *= 5)
      for (std::size_t c = b; c < best; c *= 3) {
        std::size_t d = c;
        while (d < target) d *= 2;
        best = std::min(best, d);
      }
  return best;
}

}  // namespace detail

/// Convolves signals of a fixed maximum length with one filter. The filter
/// spectrum and plans are prepared once; convolve() only touches local
/// buffers and may be called concurrently.
class Convolver {
 public:
  Convolver() = default;

  Convolver(const std::vector<double>& filter, std::size_t max_signal)
      : filter_len_(filter.size()), max_signal_(max_signal) {
    n_ = detail::smooth_size(filter_len_ + max_signal_ - 1);
    const std::size_t nc = n_ / 2 + 1;
    auto real = detail::fftw_alloc<double>(n_);
    spectrum_ = detail::fftw_alloc<fftw_complex>(nc);
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real.get(), spectrum_.get(),
                                      FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spectrum_.get(), real.get(),
                                       FFTW_ESTIMATE);
    }
    std::fill(real.get(), real.get() + n_, 0.0);
    std::copy(filter.begin(), filter.end(), real.get());
    fftw_execute_dft_r2c(forward_, real.get(), spectrum_.get());
    double ss = 0.0;
    for (double f : filter) ss += f * f;
    filter_norm2_ = std::sqrt(ss);
  }

  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;
  Convolver(Convolver&& o) noexcept { *this = std::move(o); }
  Convolver& operator=(Convolver&& o) noexcept {
    std::swap(filter_len_, o.filter_len_);
    std::swap(max_signal_, o.max_signal_);
    std::swap(n_, o.n_);
    std::swap(spectrum_, o.spectrum_);
    std::swap(forward_, o.forward_);
    std::swap(backward_, o.backward_);
    std::swap(filter_norm2_, o.filter_norm2_);
    return *this;
  }
  ~Convolver() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (backward_) fftw_destroy_plan(backward_);
  }

  std::size_t transform_size() const { return n_; }

  /// Full linear convolution (length signal + filter - 1). If `l1_error` is
  /// given, a bound on the L1 rounding error of the result is added to it.
  std::vector<double> convolve(const std::vector<double>& signal, double* l1_error = nullptr) const {
    const std::size_t nc = n_ / 2 + 1;
    auto real = detail::fftw_alloc<double>(n_);
    auto spec = detail::fftw_alloc<fftw_complex>(nc);
    std::fill(real.get(), real.get() + n_, 0.0);
    std::copy(signal.begin(), signal.end(), real.get());
    fftw_execute_dft_r2c(forward_, real.get(), spec.get());
    for (std::size_t k = 0; k < nc; ++k) {
      const double ar = spec[k][0], ai = spec[k][1];
      const double br = spectrum_[k][0], bi = spectrum_[k][1];
      spec[k][0] = ar * br - ai * bi;
      spec[k][1] = ar * bi + ai * br;
    }
    fftw_execute_dft_c2r(backward_, spec.get(), real.get());
    const std::size_t len = signal.size() + filter_len_ - 1;
    std::vector<double> out(real.get(), real.get() + len);
    const double scale = 1.0 / static_cast<double>(n_);
    for (double& v : out) v *= scale;
    if (l1_error != nullptr) {
      double ss = 0.0;
      for (double s : signal) ss += s * s;
      // Forward/backward FFT error is O(eps log n) relative in the 2-norm;
      // the factor n converts a per-entry bound into an L1 bound.
      const double eps = std::numeric_limits<double>::epsilon();
      *l1_error += static_cast<double>(n_) * 5.0 * eps * (std::log2(static_cast<double>(n_)) + 1) *
                   std::sqrt(ss) * filter_norm2_;
    }
    return out;
  }

 private:
  std::size_t filter_len_ = 0;
  std::size_t max_signal_ = 0;
  std::size_t n_ = 0;
  detail::fftw_buffer<fftw_complex> spectrum_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  double filter_norm2_ = 0.0;
};

}  // namespace qtrans
