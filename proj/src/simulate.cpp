#include "ppflow/simulate.hpp"

#include <cmath>
#include <vector>

#include "ppflow/grid.hpp"
#include "ppflow/rng.hpp"

namespace ppflow {

namespace {

// Monotone-increasing scalar map for one component, with the conditional
// parameters already resolved.
double solve_component(const std::function<double(double)>& f, double target,
                       const RootFindSpec& spec) {
  double lo = -spec.initial_half_width;
  double hi = spec.initial_half_width;
  int growths = 0;
  while (f(lo) > target) {
    lo *= spec.growth;
    if (++growths > 60)
      throw NumericError("invert: bracket expansion exceeded 60 doublings");
  }
  growths = 0;
  while (f(hi) < target) {
    hi *= spec.growth;
    if (++growths > 60)
      throw NumericError("invert: bracket expansion exceeded 60 doublings");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < spec.max_bisections; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::abs(fm - target) <= spec.abs_tolerance) return mid;
    if (fm < target)
      lo = mid;
    else
      hi = mid;
  }
  throw NumericError("invert: bisection did not reach tolerance, residual " +
                     std::to_string(std::abs(f(mid) - target)));
}

double lambda3_eval(Eigen::Ref<const Eigen::VectorXd> x) {
  return (30.0 + 10.0 * std::sin(10.0 * x[0])) * (30.0 + 10.0 * std::cos(20.0 * x[1]));
}

}  // namespace

Eigen::VectorXd invert_layer(Eigen::Ref<const Eigen::VectorXd> z,
                             const TriangularLayer& layer, const RootFindSpec& spec) {
  if (z.size() != layer.dim()) throw std::invalid_argument("invert: dimension mismatch");
  Eigen::VectorXd y(z.size());
  for (int k = 0; k < z.size(); ++k) {
    const Eigen::VectorXd raw =
        k == 0 ? layer.first_dim_params
               : condnet_forward(y.head(k), layer.cond_nets[static_cast<std::size_t>(k - 1)]);
    const auto f = [&](double t) { return sublayer_eval(t, raw, layer.kind).value; };
    y[k] = solve_component(f, z[k], spec);
  }
  return y;
}

Eigen::VectorXd invert_stack(Eigen::Ref<const Eigen::VectorXd> z,
                             const TransportStack& stack, const RootFindSpec& spec) {
  Eigen::VectorXd y = z;
  for (int j = stack.n_layers() - 1; j >= 0; --j) {
    try {
      y = invert_layer(y, stack.layers[static_cast<std::size_t>(j)], spec);
    } catch (const NumericError& e) {
      throw NumericError("invert: layer " + std::to_string(j) + ": " + e.what());
    }
  }
  return y;
}

PointPattern sample_fixed(const FittedIntensity& model, int n, std::uint64_t seed,
                          const RootFindSpec& spec) {
  if (n < 0) throw std::invalid_argument("sample: n must be >= 0");
  const int d = model.bounds.dim();
  rng::Engine eng = rng::make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  PointPattern out;
  out.points.resize(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd z(d);
    for (int k = 0; k < d; ++k) z[k] = normal(eng);
    const Eigen::VectorXd y = invert_stack(z, model.stack, spec);
    Eigen::VectorXd u(d);
    for (int k = 0; k < d; ++k) u[k] = sigmoid(y[k]);
    out.points.row(i) = model.bounds.from_unit(u).transpose();
  }
  out.bounds.lo = model.bounds.padded_lo();
  out.bounds.hi = out.bounds.lo + model.bounds.padded_range();
  out.bounds.padding = 0.0;
  return out;
}

PointPattern sample_pattern(const FittedIntensity& model, std::uint64_t seed,
                            const RootFindSpec& spec) {
  rng::Engine eng = rng::make_engine(rng::derive_stream(seed, 0));
  std::poisson_distribution<int> count(model.mu_hat);
  const int n = model.mu_hat > 0.0 ? count(eng) : 0;
  return sample_fixed(model, n, rng::derive_stream(seed, 1), spec);
}

const BuiltinIntensity& builtin_intensity(std::string_view name) {
  static const BuiltinIntensity lambda1{
      "lambda1", 1, 800.0,
      [](Eigen::Ref<const Eigen::VectorXd> x) { return 500.0 + 300.0 * std::sin(10.0 * x[0]); }};
  static const BuiltinIntensity lambda2{
      "lambda2", 1, 500.0, [](Eigen::Ref<const Eigen::VectorXd>) { return 500.0; }};
  static const BuiltinIntensity lambda3{"lambda3", 2, 1600.0, lambda3_eval};
  static const BuiltinIntensity lambda4{
      "lambda4", 2, 900.0, [](Eigen::Ref<const Eigen::VectorXd>) { return 900.0; }};
  if (name == "lambda1") return lambda1;
  if (name == "lambda2") return lambda2;
  if (name == "lambda3") return lambda3;
  if (name == "lambda4") return lambda4;
  throw DataError("unknown builtin intensity: " + std::string(name));
}

PointPattern thinning_generate(const IntensityFn& intensity, double lambda_max,
                               int dim, std::uint64_t seed) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("thinning: dim must be 1 or 2");
  if (!(lambda_max > 0.0)) throw std::invalid_argument("thinning: lambda_max must be positive");

  // check the dominating bound on a 10^4-node grid
  const int per_dim = dim == 1 ? 10000 : 100;
  const GridDef grid =
      GridDef::regular(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim),
                       std::vector<int>(static_cast<std::size_t>(dim), per_dim));
  for (long i = 0; i < grid.size(); ++i) {
    const double v = intensity(grid.node(i));
    if (v < 0.0) throw NumericError("thinning: negative intensity on the grid");
    if (v > lambda_max)
      throw DataError("thinning: lambda_max is below the intensity supremum");
  }

  rng::Engine eng = rng::make_engine(seed);
  std::poisson_distribution<int> count(lambda_max);  // unit-volume domain
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int candidates = count(eng);
  std::vector<Eigen::VectorXd> kept;
  kept.reserve(static_cast<std::size_t>(candidates));
  for (int i = 0; i < candidates; ++i) {
    Eigen::VectorXd x(dim);
    for (int k = 0; k < dim; ++k) x[k] = unif(eng);
    if (unif(eng) * lambda_max < intensity(x)) kept.push_back(std::move(x));
  }

  PointPattern out;
  out.points.resize(static_cast<long>(kept.size()), dim);
  for (std::size_t i = 0; i < kept.size(); ++i) out.points.row(static_cast<long>(i)) = kept[i];
  out.bounds = DomainBounds::unit(dim);
  return out;
}

PointPattern thinning_generate(const BuiltinIntensity& intensity, std::uint64_t seed) {
  return thinning_generate(intensity.eval, intensity.sup_bound, intensity.dim, seed);
}

}  // namespace ppflow
