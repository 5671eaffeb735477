#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string_view>

#include "ppflow/estimate.hpp"
#include "ppflow/flow.hpp"

namespace ppflow {

struct RootFindSpec {
  double abs_tolerance = 1e-10;
  int max_bisections = 200;
  double initial_half_width = 1.0;
  double growth = 2.0;
};

// Solves T^(k)(y_1..y_k) = z_k coordinate by coordinate: the bracket around
// 0 is grown until it straddles the target, then bisected until the
// residual is within tolerance.
Eigen::VectorXd invert_layer(Eigen::Ref<const Eigen::VectorXd> z,
                             const TriangularLayer& layer,
                             const RootFindSpec& spec = {});

// Inverse of the full composition, applying invert_layer from the last map
// back to the first.
Eigen::VectorXd invert_stack(Eigen::Ref<const Eigen::VectorXd> z,
                             const TransportStack& stack,
                             const RootFindSpec& spec = {});

// n points from the fitted process density: z ~ N(0, I_d), pushed back
// through the stack, squashed by the sigmoid, and mapped to original
// coordinates. The returned pattern's rectangle is the model's padded
// rectangle.
PointPattern sample_fixed(const FittedIntensity& model, int n, std::uint64_t seed,
                          const RootFindSpec& spec = {});

// Full process realization: the point count is Poisson(mu_hat).
PointPattern sample_pattern(const FittedIntensity& model, std::uint64_t seed,
                            const RootFindSpec& spec = {});

// Closed-form benchmark intensity on (0,1)^dim.
struct BuiltinIntensity {
  std::string name;
  int dim = 1;
  double sup_bound = 0.0;
  std::function<double(Eigen::Ref<const Eigen::VectorXd>)> eval;
};

// lambda1 .. lambda4.
const BuiltinIntensity& builtin_intensity(std::string_view name);

// Rejection sampler on (0,1)^dim: Poisson(lambda_max) homogeneous
// candidates, each kept with probability intensity(x)/lambda_max. The bound
// is validated against the intensity's maximum on a 10^4-node grid.
PointPattern thinning_generate(const IntensityFn& intensity, double lambda_max,
                               int dim, std::uint64_t seed);
PointPattern thinning_generate(const BuiltinIntensity& intensity, std::uint64_t seed);

}  // namespace ppflow
