#pragma once

// Transient analysis: discretize the initial law, iterate the kernel, lift,
// and carry the certified bound along.

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "qtrans/bounds.hpp"
#include "qtrans/error.hpp"
#include "qtrans/kernel.hpp"
#include "qtrans/measure.hpp"

namespace qtrans {

namespace detail {

/// Interval index containing x > 0; points within 1e-9 (relative) of a grid
/// point are taken to be on it, and a grid point belongs to the interval
/// that ends there.
inline int interval_of(double x, double delta) {
  const double r = x / delta;
  const double ri = std::round(r);
  if (std::abs(r - ri) <= 1e-9 * std::max(1.0, std::abs(r))) return static_cast<int>(ri);
  return static_cast<int>(std::ceil(r));
}

}  // namespace detail

/// p0(0) = P(Q0 = 0), p0(i) = P(Q0 in ((i-1)delta, i delta]); also returns
/// b0 = W(mu0, lift(p0)).
inline std::pair<DiscreteDist, double> discretize_initial(const GeneralMeasure& mu0, const Grid& grid) {
  mu0.validate();
  if (mu0.support_upper() > grid.m() * (1 + 1e-12))
    throw DomainError("initial law extends beyond M; increase truncation");
  DiscreteDist p(grid);
  const double d = grid.delta;
  auto add_atom = [&](double x, double mass) {
    if (x == 0.0) {
      if (!grid.zero_state) throw DomainError("initial law has an atom at 0 but the grid has no zero state");
      p.p[0] += mass;
      return;
    }
    const int i = std::clamp(detail::interval_of(x, d), 1, grid.m_delta);
    p.p[i] += mass;
  };
  for (const auto& a : mu0.atoms) add_atom(a.x, a.mass);
  for (const auto& pc : mu0.pieces) {
    if (pc.b == pc.a) {
      add_atom(pc.a, pc.mass);
      continue;
    }
    const int i0 = std::max(1, static_cast<int>(std::floor(pc.a / d)));
    const int i1 = std::min(grid.m_delta, static_cast<int>(std::ceil(pc.b / d)) + 1);
    for (int i = i0; i <= i1; ++i) {
      const double lo = std::max(pc.a, grid.point(i - 1));
      const double hi = std::min(pc.b, grid.point(i));
      if (hi > lo) p.p[i] += pc.mass * ((hi - lo) / (pc.b - pc.a));
    }
  }
  const double b0 = wasserstein(mu0, lift(p));
  return {std::move(p), b0};
}

struct TransientResult {
  Grid grid;
  std::vector<int> steps;  // snapshot steps, ascending, always including 0
  std::vector<double> times;
  std::vector<LiftedDistribution> distributions;
  BoundLedger ledger;
  BoundMode mode = BoundMode::refined;
  /// False for models whose bound is not backed by the coupling argument
  /// (absorbing zero); the ledger is then informative only.
  bool certified = true;
  bool refinement_used = false;

  double bound_at_step(int k) const { return ledger.at(static_cast<std::size_t>(k)); }

  std::size_t snapshot_index(int k) const {
    auto it = std::lower_bound(steps.begin(), steps.end(), k);
    if (it == steps.end() || *it != k) throw DomainError("no snapshot stored at that step");
    return static_cast<std::size_t>(it - steps.begin());
  }
  const LiftedDistribution& snapshot(int k) const { return distributions[snapshot_index(k)]; }
};

struct SolveOptions {
  int horizon_steps = 0;
  std::vector<int> snapshot_steps;  // step 0 and the horizon are always kept
  BoundMode mode = BoundMode::refined;
};

/// Iterates p_{k+1} = p_k P and adds the step bound of p_k to the ledger.
inline TransientResult solve(const TransitionKernel& kernel, const GeneralMeasure& mu0,
                             const SolveOptions& opt) {
  if (opt.horizon_steps < 0) throw DomainError("horizon must be non-negative");
  const Grid& grid = kernel.grid();
  auto [p, b0] = discretize_initial(mu0, grid);
  const StepBoundCalculator calc(kernel, opt.mode);

  std::set<int> wanted(opt.snapshot_steps.begin(), opt.snapshot_steps.end());
  wanted.insert(0);
  wanted.insert(opt.horizon_steps);

  TransientResult res;
  res.grid = grid;
  res.mode = opt.mode;
  res.certified = calc.certified();
  res.refinement_used = opt.mode != BoundMode::basic && calc.refinement_available();
  res.ledger = BoundLedger(b0);
  res.ledger.certified = res.certified;
  res.steps.push_back(0);
  res.times.push_back(0.0);
  res.distributions.push_back(lift(p));

  const auto& diag = kernel.diag();
  for (int k = 0; k < opt.horizon_steps; ++k) {
    double rounding = 0.0;
    DiscreteDist q = kernel.apply(p, &rounding);
    double moved = 0.0;
    for (int i = grid.first_state(); i <= grid.m_delta; ++i) moved += p.p[i] * diag[i];
    res.ledger.append(calc.step(p, rounding), moved);
    p = std::move(q);
    if (wanted.count(k + 1)) {
      res.steps.push_back(k + 1);
      res.times.push_back((k + 1) * grid.delta);
      res.distributions.push_back(lift(p));
    }
  }
  return res;
}

inline TransientResult solve(const ModelSpec& spec, const Grid& grid, const GeneralMeasure& mu0,
                             const SolveOptions& opt) {
  const TransitionKernel kernel = TransitionKernel::build(spec, grid);
  return solve(kernel, mu0, opt);
}

struct TailBracket {
  double lower;
  double upper;
};

/// Bracket for P(Q > x) at a time where the lifted law m is within
/// Wasserstein distance `bound` of the true law; uses the 1-Lipschitz ramps
/// of width `slack` below and above the indicator.
inline TailBracket certified_tail(const LiftedDistribution& m, double bound, double x, double slack) {
  if (!(slack > 0)) throw DomainError("slack must be positive");
  const double upper = threshold_mass(m, x - slack) + bound / slack;
  const double lower = threshold_mass(m, x + slack) - bound / slack;
  return {std::clamp(lower, 0.0, 1.0), std::clamp(upper, 0.0, 1.0)};
}

inline TailBracket certified_tail(const TransientResult& r, int k, double x, double slack) {
  return certified_tail(r.snapshot(k), r.bound_at_step(k), x, slack);
}

}  // namespace qtrans
