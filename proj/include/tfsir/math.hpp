#pragma once

#include <cmath>
#include <limits>

namespace tfsir::math {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

inline double log_factorial(double k) { return std::lgamma(k + 1.0); }

// log P(X = k) for X ~ Poisson(mean), with log P(0; 0) = 0 and
// log P(k > 0; 0) = -inf.
inline double log_poisson(double k, double mean) {
  if (mean <= 0.0) return k == 0.0 ? 0.0 : kNegInf;
  return k * std::log(mean) - mean - log_factorial(k);
}

inline double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * d * d / variance - 0.5 * std::log(variance) - kLogSqrt2Pi;
}

// Inverse gamma IG(shape, scale) log density at x > 0.
inline double log_inv_gamma_pdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace tfsir::math
