#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "ppflow/autodiff.hpp"
#include "ppflow/common.hpp"

namespace ppflow {

// Family of the monotone univariate sublayer S^(k).
struct SublayerKind {
  enum class Family { Naf, AffineAutoregressive, InverseAutoregressive };

  Family family = Family::Naf;
  int naf_width = 1;  // M; meaningful for Family::Naf only

  static SublayerKind naf(int m) {
    if (m < 1) throw std::invalid_argument("naf width must be >= 1");
    return SublayerKind{Family::Naf, m};
  }
  static SublayerKind affine() { return {Family::AffineAutoregressive, 1}; }
  static SublayerKind iaf() { return {Family::InverseAutoregressive, 1}; }

  // m_k: 3M for the sigmoid-mixture sublayer, 2 for the affine families.
  int param_count() const {
    return family == Family::Naf ? 3 * naf_width : 2;
  }

  bool operator==(const SublayerKind&) const = default;
};

struct SublayerParams {
  Eigen::VectorXd raw;  // length m_k
};

// One-hidden-layer feedforward net emitting the m_k sublayer parameters for
// component k from the first k-1 coordinates. Sigmoid activation.
struct ConditionalNet {
  Eigen::MatrixXd weights_in;   // H x (k-1)
  Eigen::VectorXd bias_in;      // H
  Eigen::MatrixXd weights_out;  // m_k x H
  Eigen::VectorXd bias_out;     // m_k

  int input_dim() const { return static_cast<int>(weights_in.cols()); }
  int hidden_width() const { return static_cast<int>(weights_in.rows()); }
  int output_dim() const { return static_cast<int>(weights_out.rows()); }
};

// Increasing triangular map on R^d: component k reads coordinates 1..k and
// is strictly increasing in the k-th. Component 1 has free parameters; the
// rest get theirs from conditional nets.
struct TriangularLayer {
  SublayerKind kind;
  Eigen::VectorXd first_dim_params;       // m_1
  std::vector<ConditionalNet> cond_nets;  // for k = 2..d

  int dim() const { return static_cast<int>(cond_nets.size()) + 1; }
};

// Composition T = T_N ∘ ... ∘ T_1 with a standard normal reference density.
struct TransportStack {
  std::vector<TriangularLayer> layers;

  int dim() const { return layers.empty() ? 0 : layers.front().dim(); }
  int n_layers() const { return static_cast<int>(layers.size()); }
};

// Axis-aligned data rectangle plus the padding fraction used when mapping
// it onto the unit cube. The unit-cube map sends
// [lo - p·range, hi + p·range] -> (0,1) per dimension.
struct DomainBounds {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double padding = 0.0;

  int dim() const { return static_cast<int>(lo.size()); }
  Eigen::VectorXd padded_lo() const { return lo - padding * (hi - lo); }
  Eigen::VectorXd padded_range() const { return (1.0 + 2.0 * padding) * (hi - lo); }
  double volume_scale() const { return padded_range().prod(); }

  Eigen::VectorXd to_unit(Eigen::Ref<const Eigen::VectorXd> x) const {
    return (x - padded_lo()).cwiseQuotient(padded_range());
  }
  Eigen::VectorXd from_unit(Eigen::Ref<const Eigen::VectorXd> u) const {
    return padded_lo() + u.cwiseProduct(padded_range());
  }
  // Containment in the padded rectangle (the region the model covers).
  bool contains(Eigen::Ref<const Eigen::VectorXd> x) const {
    const Eigen::VectorXd plo = padded_lo();
    const Eigen::VectorXd phi = plo + padded_range();
    return (x.array() >= plo.array()).all() && (x.array() <= phi.array()).all();
  }

  static DomainBounds unit(int d, double padding = 0.0) {
    DomainBounds b;
    b.lo = Eigen::VectorXd::Zero(d);
    b.hi = Eigen::VectorXd::Ones(d);
    b.padding = padding;
    return b;
  }
};

// Topology of a stack; enough to build layouts, tapes and fresh stacks.
struct StackSpec {
  int dim = 1;
  int n_layers = 4;
  SublayerKind kind = SublayerKind::naf(64);
  int cond_hidden = 64;
};

// Zero-parameter stack. For the sigmoid-mixture and affine families this is
// exactly the identity map.
TransportStack make_stack(const StackSpec& spec);

// Random initialization: conditional-net weights uniform in ±1/sqrt(fan_in),
// sublayer biases spread so each component starts as a gentle monotone map.
void init_stack(TransportStack& stack, std::uint64_t seed);

// Flat-parameter view of a stack.
ad::ParamLayout make_param_layout(const StackSpec& spec);
Eigen::VectorXd pack_params(const TransportStack& stack, const ad::ParamLayout& layout);
TransportStack make_stack_from_params(const StackSpec& spec,
                                      Eigen::Ref<const Eigen::VectorXd> values);

// Normalized mixture weights w_i > 0, sum w_i = 1, from raw weight params.
Eigen::VectorXd naf_weights(Eigen::Ref<const Eigen::VectorXd> raw_w);

struct Eval1 {
  double value = 0.0;
  double deriv = 0.0;
};

// S^(k)(x; raw) and its derivative in x. The derivative is positive for all
// three families by construction.
Eval1 sublayer_eval(double x, Eigen::Ref<const Eigen::VectorXd> raw,
                    const SublayerKind& kind);

Eigen::VectorXd condnet_forward(Eigen::Ref<const Eigen::VectorXd> x_prefix,
                                const ConditionalNet& net);

struct EmbedResult {
  Eigen::VectorXd y;
  double log_jac = 0.0;
};

// Element-wise logit with its log Jacobian sum_k log(1/x_k + 1/(1-x_k)).
// Coordinates are clamped into the open cube first; clamps are counted in
// logit_clamp_count().
EmbedResult logit_embed(Eigen::Ref<const Eigen::VectorXd> x);

long logit_clamp_count();
void reset_logit_clamp_count();

struct MapResult {
  Eigen::VectorXd z;
  double log_det = 0.0;
};

MapResult layer_forward(Eigen::Ref<const Eigen::VectorXd> y, const TriangularLayer& layer);
MapResult stack_forward(Eigen::Ref<const Eigen::VectorXd> y, const TransportStack& stack);

// log of the process density at x in (0,1)^d:
// log η(T(logit x)) + log det ∇T(logit x) + log Jacobian of the embedding.
double log_process_density(Eigen::Ref<const Eigen::VectorXd> x_unit,
                           const TransportStack& stack);

}  // namespace ppflow
