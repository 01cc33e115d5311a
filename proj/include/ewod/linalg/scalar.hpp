#pragma once

#include <cmath>
#include <stdexcept>

namespace ewod::linalg {

/// Logistic sigmoid, overflow-safe on both tails.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// softplus(x) = ln(1 + e^x), computed as max(x,0) + log1p(e^{-|x|}).
inline double softplus(double x) {
  const double m = x > 0.0 ? x : 0.0;
  return m + std::log1p(std::exp(-std::abs(x)));
}

/// Inverse sigmoid; requires p in the open interval (0, 1).
inline double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("logit: argument must be in (0, 1)");
  }
  return std::log(p / (1.0 - p));
}

/// Inverse of softplus for y > 0 (used to initialize raw parameters).
inline double softplus_inverse(double y) {
  if (!(y > 0.0)) {
    throw std::domain_error("softplus_inverse: argument must be > 0");
  }
  // ln(e^y - 1), stable form.
  return y + std::log(-std::expm1(-y));
}

}  // namespace ewod::linalg
