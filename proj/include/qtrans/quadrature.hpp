#pragma once

#include <cmath>
#include <vector>

#include "qtrans/error.hpp"

namespace qtrans {

/// Lower and upper bounds of an integrand over a sub-interval.
struct Bracket {
  double lo;
  double hi;
};

/// Adaptive bisection quadrature with a guaranteed enclosure.
///
/// `bracket(u, v)` must return bounds that hold for the integrand on all of
/// [u, v]; for a monotone integrand these are just the endpoint values. Each
/// accepted cell contributes the midpoint of its bracket times its width, and
/// half the bracket width times the cell width to the error, so the true
/// integral always lies within value +/- error. Cells are refined until the
/// local enclosure width meets its share of `tol` or `max_depth` is reached.
template <class BracketFn>
Estimate integrate_enclosed(BracketFn&& bracket, double a, double b, double tol,
                            int max_depth = 24) {
  Estimate out;
  if (!(b > a)) return out;
  struct Cell {
    double u, v;
    int depth;
  };
  std::vector<Cell> stack{{a, b, 0}};
  const double span = b - a;
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    const Bracket br = bracket(c.u, c.v);
    const double h = c.v - c.u;
    const double width = (br.hi - br.lo) * h;
    if (width <= tol * h / span || c.depth >= max_depth) {
      out.value += 0.5 * (br.lo + br.hi) * h;
      out.error += 0.5 * width;
      continue;
    }
    const double mid = 0.5 * (c.u + c.v);
    stack.push_back({mid, c.v, c.depth + 1});
    stack.push_back({c.u, mid, c.depth + 1});
  }
  return out;
}

/// Enclosed integral of a non-decreasing function.
template <class F>
Estimate integrate_monotone(F&& f, double a, double b, double tol, int max_depth = 24) {
  return integrate_enclosed(
      [&](double u, double v) { return Bracket{f(u), f(v)}; }, a, b, tol, max_depth);
}

}  // namespace qtrans
