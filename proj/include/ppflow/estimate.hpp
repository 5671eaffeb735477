#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "ppflow/autodiff.hpp"
#include "ppflow/flow.hpp"

namespace ppflow {

// An observed or simulated set of d-dimensional event locations.
// `unit_scale` marks patterns whose points live on (0,1)^d while `bounds`
// still describes the original rectangle and the padding of the map.
struct PointPattern {
  Eigen::MatrixXd points;  // n x d
  DomainBounds bounds;
  bool unit_scale = false;

  int n() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Pattern over the data's own bounding box (padding 0).
PointPattern pattern_from_points(Eigen::MatrixXd points);

struct FitConfig {
  int n_layers = 4;
  SublayerKind kind = SublayerKind::naf(64);
  int cond_hidden = 64;
  double learning_rate = 1e-4;
  int iterations = 5000;
  int batch = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  double padding = 0.01;

  StackSpec stack_spec(int dim) const {
    return StackSpec{dim, n_layers, kind, cond_hidden};
  }
};

struct FitMeta {
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_objective = 0.0;
};

struct FittedIntensity {
  TransportStack stack;
  StackSpec spec;
  double mu_hat = 0.0;  // integrated-intensity estimate, equal to n
  DomainBounds bounds;
  std::vector<double> fit_trace;
  FitMeta meta;
};

// Affine map of the pattern onto (0,1)^d; the padded rectangle
// [lo - p·range, hi + p·range] lands on the unit cube and the map is kept
// in the result's bounds. Points on the padded boundary are counted into
// *boundary_hits when given. Throws DataError on a zero range.
PointPattern normalize_pattern(const PointPattern& raw, double padding,
                               int* boundary_hits = nullptr);

// Per-point tape for the fitting objective. The tape evaluates
// log η(T(y)) + log det ∇T(y) for one embedded point y; the embedding
// Jacobian of each data point is added outside the tape (it does not
// depend on the parameters).
class ObjectiveGraph {
 public:
  ObjectiveGraph(const StackSpec& spec, const PointPattern& unit_pattern);

  const ad::ParamLayout& layout() const { return layout_; }
  ad::Tape& tape() { return tape_; }
  int n_points() const { return static_cast<int>(embedded_.cols()); }

  // Negative log-likelihood over all points (or a subset).
  double nll(Eigen::Ref<const Eigen::VectorXd> params);
  // nll and its gradient; grad is overwritten.
  double nll_grad(Eigen::Ref<const Eigen::VectorXd> params, Eigen::VectorXd& grad);
  double nll_grad_subset(Eigen::Ref<const Eigen::VectorXd> params,
                         const std::vector<int>& idx, Eigen::VectorXd& grad);

 private:
  ad::Tape tape_;
  ad::ParamLayout layout_;
  Eigen::MatrixXd embedded_;   // n x d logit-embedded points
  Eigen::VectorXd embed_jac_;  // per-point log Jacobian of the embedding
};

// -sum_i log_process_density(x_i) under the stack described by `spec` with
// parameters `params`; the pattern must be on the unit scale.
double nll_objective(Eigen::Ref<const Eigen::VectorXd> params,
                     const PointPattern& unit_pattern, const StackSpec& spec);

// Maximum-likelihood fit by adaptive-moment gradient descent.
FittedIntensity fit(const PointPattern& pattern, const FitConfig& config);

// Intensity in original coordinates: mu_hat · process density of the
// unit-mapped point, divided by the padded-rectangle volume.
double intensity_at(const FittedIntensity& model, Eigen::Ref<const Eigen::VectorXd> x);

using IntensityFn = std::function<double(Eigen::Ref<const Eigen::VectorXd>)>;

// Kullback-Leibler divergence between two Poisson processes with the given
// intensities: ∫(ρ2 - ρ1) + ∫ ρ1 log(ρ1/ρ2), by the midpoint rule on a
// regular grid with `resolution` nodes per dimension.
double kl_between(const IntensityFn& rho1, const IntensityFn& rho2,
                  const DomainBounds& domain, int resolution);

}  // namespace ppflow
