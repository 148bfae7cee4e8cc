#pragma once

// Exact event-driven path simulation of the continuous-state queues, and
// the empirical Wasserstein distance used for validation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

#include "qtrans/error.hpp"
#include "qtrans/kernel.hpp"
#include "qtrans/measure.hpp"

namespace qtrans {

struct SimConfig {
  ModelSpec spec;
  GeneralMeasure mu0;
  double t = 0.0;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent per-path generator: the path index is hashed together with
/// the run seed.
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x5851f42d4c957f2dULL)));
}

template <class Rng>
double sample_measure(const GeneralMeasure& m, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng) * m.total();
  for (const auto& a : m.atoms) {
    if (u < a.mass) return a.x;
    u -= a.mass;
  }
  for (const auto& p : m.pieces) {
    if (u < p.mass) return p.a + (p.b - p.a) * unif(rng);
    u -= p.mass;
  }
  if (!m.pieces.empty()) {
    const auto& p = m.pieces.back();
    return p.a + (p.b - p.a) * unif(rng);
  }
  return m.atoms.back().x;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace detail

/// Q_t for one path. M/G/1: drift -1 held at 0, jumps +B. Spectrally
/// negative: drift +1, jumps -B stopped at 0 (and kept there when zero is
/// absorbing).
template <class Rng>
double simulate_path(const ModelSpec& spec, double q0, double t, Rng& rng) {
  std::exponential_distribution<double> gap(spec.lambda);
  double q = q0;
  double s = 0.0;
  if (spec.kind == ProcessKind::mg1) {
    for (;;) {
      const double tau = gap(rng);
      if (s + tau >= t) return std::max(q - (t - s), 0.0);
      s += tau;
      q = std::max(q - tau, 0.0) + spec.job.sample(rng);
    }
  }
  if (spec.absorbing_zero && q == 0.0) return 0.0;
  for (;;) {
    const double tau = gap(rng);
    if (s + tau >= t) return q + (t - s);
    s += tau;
    q = std::max(q + tau - spec.job.sample(rng), 0.0);
    if (spec.absorbing_zero && q == 0.0) return 0.0;
  }
}

/// n_paths iid samples of Q_t, in path order. The result depends only on
/// the seed, not on the thread count.
inline std::vector<double> simulate(const SimConfig& cfg) {
  cfg.spec.validate();
  cfg.mu0.validate();
  if (cfg.n_paths < 1) throw DomainError("need at least one path");
  if (!(cfg.t >= 0)) throw DomainError("simulation time must be non-negative");
  std::vector<double> out(cfg.n_paths);
  const unsigned nt =
      std::min<unsigned>(detail::resolve_threads(cfg.threads), static_cast<unsigned>(cfg.n_paths));
  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      auto rng = detail::path_rng(cfg.seed, k);
      const double q0 = detail::sample_measure(cfg.mu0, rng);
      out[k] = simulate_path(cfg.spec, q0, cfg.t, rng);
    }
  };
  if (nt <= 1) {
    worker(0, cfg.n_paths);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (cfg.n_paths + nt - 1) / nt;
  for (unsigned w = 0; w < nt; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(cfg.n_paths, lo + chunk);
    if (lo < hi) pool.emplace_back(worker, lo, hi);
  }
  for (auto& th : pool) th.join();
  return out;
}

struct EmpiricalDistance {
  double estimate;
  double std_error;
};

/// W1 between the empirical law of `samples` and m, with a bootstrap
/// standard error.
inline EmpiricalDistance empirical_wasserstein(std::vector<double> samples, const LiftedDistribution& m,
                                               int resamples = 200, std::uint64_t seed = 0x5eed) {
  if (samples.size() < 2) throw DomainError("need at least two samples");
  std::sort(samples.begin(), samples.end());
  const CdfProfile target(m);
  const double estimate = wasserstein(CdfProfile::empirical_sorted(samples), target);
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  const double w = 1.0 / static_cast<double>(samples.size());
  std::vector<double> weights(samples.size());
  double sum = 0.0, sum2 = 0.0;
  for (int b = 0; b < resamples; ++b) {
    std::fill(weights.begin(), weights.end(), 0.0);
    for (std::size_t k = 0; k < samples.size(); ++k) weights[pick(rng)] += w;
    const double v = wasserstein(CdfProfile::empirical_sorted(samples, weights), target);
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / resamples;
  const double var = std::max(0.0, (sum2 - resamples * mean * mean) / (resamples - 1));
  return {estimate, std::sqrt(var)};
}

}  // namespace qtrans
