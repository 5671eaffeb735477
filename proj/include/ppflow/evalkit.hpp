#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "ppflow/estimate.hpp"

namespace ppflow {

// Product-Gaussian kernel intensity estimate with per-dimension bandwidths.
struct KdeModel {
  Eigen::MatrixXd points;     // n x d training points
  Eigen::VectorXd bandwidth;  // h_k > 0
  int n = 0;
};

// Bandwidths by Silverman's rule: h_k = sd_k * (4 / ((d+2) n))^(1/(d+4)).
KdeModel kde_fit(const PointPattern& pattern);

// lambda_KDE(x) = sum_i prod_k phi((x_k - x_ik)/h_k) / h_k.
double kde_intensity(const KdeModel& model, Eigen::Ref<const Eigen::VectorXd> x);

// sqrt of the midpoint-rule integral of (fa - fb)^2 over the rectangle,
// with `resolution` nodes per dimension.
double l2_distance(const IntensityFn& fa, const IntensityFn& fb,
                   const DomainBounds& domain, int resolution);

struct PitResult {
  double ks = 0.0;
  // (fitted quantile, empirical quantile) pairs, sorted
  std::vector<std::pair<double, double>> qq;
};

// Probability integral transform through the fitted map: every coordinate
// of every point becomes Phi(T(logit(u))^(k)); the pooled n*d values are
// tested against Uniform(0,1) with the Kolmogorov-Smirnov statistic.
PitResult pit_ks(const FittedIntensity& model, const PointPattern& pattern);

}  // namespace ppflow
