#include "ppflow/autodiff.hpp"

#include <cmath>

namespace ppflow::ad {

namespace {

using MapArr = Eigen::Map<Eigen::ArrayXd>;
using MapCArr = Eigen::Map<const Eigen::ArrayXd>;

}  // namespace

NodeId Tape::param() {
  if (n_inputs_ > 0 || static_cast<int>(nodes_.size()) > n_params_)
    throw std::invalid_argument("tape: params must be declared first");
  ++n_params_;
  return emit(Op::Param, -1, -1);
}

NodeId Tape::input() {
  if (static_cast<int>(nodes_.size()) > n_params_ + n_inputs_)
    throw std::invalid_argument("tape: inputs must be declared before computed nodes");
  ++n_inputs_;
  return emit(Op::Input, -1, -1);
}

NodeId Tape::constant(double v) {
  const NodeId id = emit(Op::Const, -1, -1);
  const_values_.emplace_back(id, v);
  return id;
}

NodeId Tape::dot(NodeId a0, NodeId b0, int len) {
  if (len <= 0) throw std::invalid_argument("tape: dot needs len >= 1");
  check_operand(a0 + len - 1);
  check_operand(b0 + len - 1);
  return emit(Op::Dot, a0, b0, len);
}

NodeId Tape::sum(NodeId a0, int len) {
  if (len <= 0) throw std::invalid_argument("tape: sum needs len >= 1");
  check_operand(a0 + len - 1);
  return emit(Op::Sum, a0, -1, len);
}

void Tape::set_output(NodeId id) {
  check_operand(id);
  output_ = id;
}

NodeId Tape::emit(Op op, NodeId a, NodeId b, std::int32_t len) {
  if (a >= 0) check_operand(a);
  if (b >= 0) check_operand(b);
  const NodeId id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(Node{op, a, b, len});
  first_computed_ = static_cast<NodeId>(n_params_ + n_inputs_);
  forward_done_ = false;
  buffers_ready_ = false;
  return id;
}

void Tape::check_operand(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw std::invalid_argument("tape: operand id out of range");
}

void Tape::ensure_buffers() {
  if (buffers_ready_) return;
  const auto n = static_cast<long>(nodes_.size());
  val_ = Eigen::ArrayXd::Zero(n);
  adj_ = Eigen::ArrayXd::Zero(n);
  for (const auto& [id, v] : const_values_) val_[id] = v;
  buffers_ready_ = true;
}

void Tape::load_params(Eigen::Ref<const Eigen::VectorXd> params) {
  if (params.size() != n_params_)
    throw std::invalid_argument("tape: parameter count mismatch");
  ensure_buffers();
  for (int i = 0; i < n_params_; ++i) val_[i] = params[i];
  forward_done_ = false;
}

double Tape::forward_inputs(Eigen::Ref<const Eigen::VectorXd> inputs) {
  if (inputs.size() != n_inputs_)
    throw std::invalid_argument("tape: input count mismatch");
  ensure_buffers();
  for (int i = 0; i < n_inputs_; ++i) val_[n_params_ + i] = inputs[i];
  if (output_ < 0) throw std::invalid_argument("tape: no output node set");
  sweep_forward();
  forward_done_ = true;
  return val_[output_];
}

double Tape::forward_eval(Eigen::Ref<const Eigen::VectorXd> params,
                          Eigen::Ref<const Eigen::VectorXd> inputs) {
  load_params(params);
  const double out = forward_inputs(inputs);
  if (!std::isfinite(out))
    throw NumericError("tape: non-finite value at output node");
  return out;
}

void Tape::sweep_forward() {
  double* v = val_.data();
  const int n = static_cast<int>(nodes_.size());
  for (int i = first_computed_; i < n; ++i) {
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    switch (nd.op) {
      case Op::Const:
        break;
      case Op::Add: v[i] = v[nd.a] + v[nd.b]; break;
      case Op::Sub: v[i] = v[nd.a] - v[nd.b]; break;
      case Op::Mul: v[i] = v[nd.a] * v[nd.b]; break;
      case Op::Div: v[i] = v[nd.a] / v[nd.b]; break;
      case Op::Neg: v[i] = -v[nd.a]; break;
      case Op::Exp: v[i] = std::exp(v[nd.a]); break;
      case Op::Log: v[i] = std::log(v[nd.a]); break;
      case Op::Sigmoid: v[i] = ppflow::sigmoid(v[nd.a]); break;
      case Op::Logit: v[i] = ppflow::logit(v[nd.a]); break;
      case Op::Dot:
        v[i] = MapCArr(v + nd.a, nd.len).cwiseProduct(MapCArr(v + nd.b, nd.len)).sum();
        break;
      case Op::Sum: v[i] = MapCArr(v + nd.a, nd.len).sum(); break;
      case Op::Copy: v[i] = v[nd.a]; break;
      case Op::Param:
      case Op::Input:
        break;
    }
  }
}

void Tape::sweep_backward() {
  double* v = val_.data();
  double* g = adj_.data();
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= first_computed_; --i) {
    const double gi = g[i];
    if (gi == 0.0) continue;
    const Node& nd = nodes_[static_cast<std::size_t>(i)];
    switch (nd.op) {
      case Op::Const:
        break;
      case Op::Add:
        g[nd.a] += gi;
        g[nd.b] += gi;
        break;
      case Op::Sub:
        g[nd.a] += gi;
        g[nd.b] -= gi;
        break;
      case Op::Mul:
        g[nd.a] += gi * v[nd.b];
        g[nd.b] += gi * v[nd.a];
        break;
      case Op::Div:
        g[nd.a] += gi / v[nd.b];
        g[nd.b] -= gi * v[i] / v[nd.b];
        break;
      case Op::Neg: g[nd.a] -= gi; break;
      case Op::Exp: g[nd.a] += gi * v[i]; break;
      case Op::Log: g[nd.a] += gi / v[nd.a]; break;
      case Op::Sigmoid: {
        const double s = v[i];
        g[nd.a] += gi * s * (1.0 - s);
        break;
      }
      case Op::Logit: {
        const double p = clamp_unit(v[nd.a]);
        g[nd.a] += gi / (p * (1.0 - p));
        break;
      }
      case Op::Dot:
        MapArr(g + nd.a, nd.len) += gi * MapCArr(v + nd.b, nd.len);
        MapArr(g + nd.b, nd.len) += gi * MapCArr(v + nd.a, nd.len);
        break;
      case Op::Sum: MapArr(g + nd.a, nd.len) += gi; break;
      case Op::Copy: g[nd.a] += gi; break;
      case Op::Param:
      case Op::Input:
        break;
    }
  }
}

bool Tape::backward_accumulate(double seed, Eigen::Ref<Eigen::VectorXd> grad) {
  if (!forward_done_)
    throw std::invalid_argument("tape: backward requires a completed forward pass");
  if (grad.size() != n_params_)
    throw std::invalid_argument("tape: gradient size mismatch");
  adj_.setZero();
  adj_[output_] = seed;
  sweep_backward();
  bool finite = true;
  for (int i = 0; i < n_params_; ++i) {
    const double a = adj_[i];
    grad[i] += a;
    finite = finite && std::isfinite(a);
  }
  return finite;
}

Eigen::VectorXd Tape::backward_grad() {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_params_);
  if (!backward_accumulate(1.0, grad))
    throw NumericError("tape: non-finite adjoint in gradient");
  return grad;
}

ParamSlice ParamLayout::add(ParamKey key, int len) {
  if (len < 0) throw std::invalid_argument("param layout: negative slice length");
  if (slices_.count(key) > 0)
    throw std::invalid_argument("param layout: duplicate key");
  const ParamSlice s{size_, len};
  slices_[key] = s;
  size_ += len;
  return s;
}

ParamSlice ParamLayout::at(ParamKey key) const {
  const auto it = slices_.find(key);
  if (it == slices_.end())
    throw std::invalid_argument("param layout: unknown key");
  return it->second;
}

}  // namespace ppflow::ad
