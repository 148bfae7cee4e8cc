#pragma once

#include <stdexcept>
#include <string>

namespace qtrans {

/// Raised when a Wasserstein certificate cannot be produced, e.g. an M/G/1
/// model whose job sizes have no finite mean.
class CertificationError : public std::runtime_error {
 public:
  explicit CertificationError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for inputs that violate a documented precondition (bad grid,
/// initial law outside the truncated state space, unnormalized measures).
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical value together with a rigorous bound on its absolute error.
/// Closed-form evaluations carry error == 0.
struct Estimate {
  double value = 0.0;
  double error = 0.0;

  Estimate& operator+=(const Estimate& o) {
    value += o.value;
    error += o.error;
    return *this;
  }
  Estimate& operator-=(const Estimate& o) {
    value -= o.value;
    error += o.error;
    return *this;
  }
  friend Estimate operator+(Estimate a, const Estimate& b) { return a += b; }
  friend Estimate operator-(Estimate a, const Estimate& b) { return a -= b; }
  friend Estimate operator*(double s, const Estimate& e) {
    return {s * e.value, (s < 0 ? -s : s) * e.error};
  }
};

}  // namespace qtrans
