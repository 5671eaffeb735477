// Independent oracles used to freeze expected values: finite differences,
// plain-loop quadrature, KS statistics and rank correlation. These
// deliberately avoid the library's own evaluation paths.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace oracles {

// Central finite-difference gradient of f at theta.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& theta, double h = 1e-5) {
  Eigen::VectorXd g(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd hi = theta, lo = theta;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Midpoint-rule quadrature over [lo1,hi1] (d=1).
inline double quadrature_1d(const std::function<double(double)>& f, double lo, double hi,
                            int n) {
  const double w = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += f(lo + (i + 0.5) * w);
  return acc * w;
}

// Midpoint-rule quadrature over a rectangle (d=2).
inline double quadrature_2d(const std::function<double(double, double)>& f, double lo1,
                            double hi1, double lo2, double hi2, int n1, int n2) {
  const double w1 = (hi1 - lo1) / n1;
  const double w2 = (hi2 - lo2) / n2;
  double acc = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) acc += f(lo1 + (i + 0.5) * w1, lo2 + (j + 0.5) * w2);
  return acc * w1 * w2;
}

// One-sample Kolmogorov-Smirnov statistic of samples against a CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double c = cdf(samples[i]);
    ks = std::max({ks, c - static_cast<double>(i) / n,
                   (static_cast<double>(i) + 1.0) / n - c});
  }
  return ks;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i + 1);
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  return num / std::sqrt(da * db);
}

}  // namespace oracles
