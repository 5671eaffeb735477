#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <vector>

#include "ppflow/common.hpp"

namespace ppflow::ad {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
  Const,
  Param,
  Input,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Sigmoid,
  Logit,
  Dot,   // sum_i val[a+i] * val[b+i] over two contiguous ranges
  Sum,   // sum_i val[a+i] over a contiguous range
  Copy,
};

struct Node {
  Op op;
  NodeId a = -1;
  NodeId b = -1;
  std::int32_t len = 0;
};

// Tape-based scalar computation graph with reverse-mode differentiation.
//
// Node ids index directly into the value and adjoint buffers, so the graph
// is built once per topology and the buffers are reused for every
// evaluation. Parameter nodes come first, then input nodes, then computed
// nodes; ranges of consecutively created nodes are contiguous in the value
// buffer, which lets Dot/Sum run as vectorized reductions.
class Tape {
 public:
  // Declaration order is fixed: all params, then all inputs, then the rest.
  NodeId param();
  NodeId input();
  NodeId constant(double v);

  NodeId add(NodeId x, NodeId y) { return emit(Op::Add, x, y); }
  NodeId sub(NodeId x, NodeId y) { return emit(Op::Sub, x, y); }
  NodeId mul(NodeId x, NodeId y) { return emit(Op::Mul, x, y); }
  NodeId div(NodeId x, NodeId y) { return emit(Op::Div, x, y); }
  NodeId neg(NodeId x) { return emit(Op::Neg, x, -1); }
  NodeId exp(NodeId x) { return emit(Op::Exp, x, -1); }
  NodeId log(NodeId x) { return emit(Op::Log, x, -1); }
  NodeId sigmoid(NodeId x) { return emit(Op::Sigmoid, x, -1); }
  NodeId logit(NodeId x) { return emit(Op::Logit, x, -1); }
  NodeId copy(NodeId x) { return emit(Op::Copy, x, -1); }

  // Affine combination of two contiguous node ranges starting at a0 and b0.
  NodeId dot(NodeId a0, NodeId b0, int len);
  NodeId sum(NodeId a0, int len);

  void set_output(NodeId id);
  NodeId output() const { return output_; }

  int param_count() const { return n_params_; }
  int input_count() const { return n_inputs_; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Full forward pass; returns the output value. Throws NumericError if the
  // output is non-finite and std::invalid_argument on arity mismatch.
  double forward_eval(Eigen::Ref<const Eigen::VectorXd> params,
                      Eigen::Ref<const Eigen::VectorXd> inputs);

  // Gradient of the output w.r.t. all parameters, in declaration order.
  // Requires a completed forward pass over the same values.
  Eigen::VectorXd backward_grad();

  // Split entry points for training loops: parameters are loaded once per
  // iteration, then (inputs, backward) run once per data point.
  void load_params(Eigen::Ref<const Eigen::VectorXd> params);
  double forward_inputs(Eigen::Ref<const Eigen::VectorXd> inputs);
  // grad += seed * d(output)/d(params); returns false if any accumulated
  // adjoint was non-finite.
  bool backward_accumulate(double seed, Eigen::Ref<Eigen::VectorXd> grad);

  double value(NodeId id) const { return val_[id]; }

 private:
  NodeId emit(Op op, NodeId a, NodeId b, std::int32_t len = 0);
  void check_operand(NodeId id) const;
  void ensure_buffers();
  void sweep_forward();
  void sweep_backward();

  std::vector<Node> nodes_;
  std::vector<std::pair<NodeId, double>> const_values_;
  // 32-byte-aligned buffers so the vectorized Dot/Sum reductions see the
  // same alignment pattern in every Tape instance; results are then
  // bit-identical across instances of the same topology.
  Eigen::ArrayXd val_;
  Eigen::ArrayXd adj_;
  int n_params_ = 0;
  int n_inputs_ = 0;
  NodeId first_computed_ = 0;
  NodeId output_ = -1;
  bool forward_done_ = false;
  bool buffers_ready_ = false;
};

// Free-function spellings for expression-style call sites.
inline double forward_eval(Tape& g, Eigen::Ref<const Eigen::VectorXd> params,
                           Eigen::Ref<const Eigen::VectorXd> inputs) {
  return g.forward_eval(params, inputs);
}
inline Eigen::VectorXd backward_grad(Tape& g,
                                     Eigen::Ref<const Eigen::VectorXd> params,
                                     Eigen::Ref<const Eigen::VectorXd> inputs) {
  g.forward_eval(params, inputs);
  return g.backward_grad();
}

// Identifies one parameter group of one sublayer: `layer` is the map index
// j = 0..N-1, `dim` the component k = 0..d-1, `group` a ParamGroup value.
struct ParamKey {
  int layer = 0;
  int dim = 0;
  int group = 0;
  auto operator<=>(const ParamKey&) const = default;
};

enum class ParamGroup : int {
  SublayerTheta = 0,  // raw sublayer parameters (k = 0 only)
  CondWeightsIn = 1,
  CondBiasIn = 2,
  CondWeightsOut = 3,
  CondBiasOut = 4,
};

struct ParamSlice {
  int offset = 0;
  int len = 0;
};

// Bijective map from named parameter groups to slices of one flat vector.
class ParamLayout {
 public:
  ParamSlice add(ParamKey key, int len);
  ParamSlice at(ParamKey key) const;
  bool contains(ParamKey key) const { return slices_.count(key) > 0; }
  int size() const { return size_; }

 private:
  std::map<ParamKey, ParamSlice> slices_;
  int size_ = 0;
};

struct ParamVector {
  ParamLayout layout;
  Eigen::VectorXd values;

  Eigen::VectorBlock<Eigen::VectorXd> slice(ParamKey key) {
    const ParamSlice s = layout.at(key);
    return values.segment(s.offset, s.len);
  }
};

}  // namespace ppflow::ad
