#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ppflow {

// Malformed or unreadable input (files, columns, degenerate patterns).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure at runtime (divergence, non-finite values, root finding).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Coordinates are kept strictly inside (0,1) by this margin before any logit.
inline constexpr double kUnitClamp = 1e-7;

inline constexpr double kLogTwoPi = 1.8378770664093454836;

inline double clamp_unit(double p) {
  return std::clamp(p, kUnitClamp, 1.0 - kUnitClamp);
}

// Overflow-safe sigmoid, exact at 0 and monotone on all of R.
inline double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Inverse sigmoid; the argument is clamped into [kUnitClamp, 1-kUnitClamp].
inline double logit(double p) {
  p = clamp_unit(p);
  return std::log(p) - std::log1p(-p);
}

inline double log_std_normal_pdf(double z) {
  return -0.5 * (z * z + kLogTwoPi);
}

inline double log_std_normal_pdf(Eigen::Ref<const Eigen::VectorXd> z) {
  return -0.5 * (z.squaredNorm() + z.size() * kLogTwoPi);
}

inline double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

}  // namespace ppflow
