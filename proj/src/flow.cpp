#include "ppflow/flow.hpp"

#include <cmath>

#include "ppflow/rng.hpp"

namespace ppflow {

namespace {

thread_local long t_logit_clamps = 0;

int first_dim_param_count(const SublayerKind& kind) { return kind.param_count(); }

// The stack starts near y -> 0.588 * y in total. That scale matches the
// logistic-to-normal quantile ratio, so the initial process density is
// close to uniform on the domain: the fit starts from the homogeneous
// null model. Mixture offsets are spread across the embedded data range
// (wide enough to carve structure anywhere in the domain) and the weights
// are least-squares calibrated so the spread does not distort the initial
// map.
constexpr double kInitTotalSlope = 0.588;
constexpr double kInitOffsetSpread = 4.0;
constexpr double kInitJitter = 0.05;

// Sublayer bias pattern for one of n_layers maps in composition.
Eigen::VectorXd gentle_bias(const SublayerKind& kind, int n_layers, rng::Engine& eng) {
  const int m = kind.param_count();
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  if (kind.family != SublayerKind::Family::Naf) return b;

  const int M = kind.naf_width;
  const double layer_slope = std::pow(kInitTotalSlope, 1.0 / n_layers);
  Eigen::VectorXd log_a(M), knots(M);
  for (int i = 0; i < M; ++i) {
    log_a[i] = kInitJitter * unif(eng);
    const double t = M == 1 ? 0.0 : -1.0 + 2.0 * i / (M - 1.0);
    knots[i] = kInitOffsetSpread * t + kInitJitter * unif(eng);
  }

  // weights solving min ||sum_i w_i sigmoid(a_i y + b_i) - sigmoid(c y)||^2
  // on a grid, clamped positive and renormalized
  const int grid = 201;
  Eigen::MatrixXd basis(grid, M);
  Eigen::VectorXd target(grid);
  for (int g = 0; g < grid; ++g) {
    const double y = -8.0 + 16.0 * g / (grid - 1.0);
    target[g] = sigmoid(layer_slope * y);
    for (int i = 0; i < M; ++i) basis(g, i) = sigmoid(std::exp(log_a[i]) * y + knots[i]);
  }
  Eigen::MatrixXd gram = basis.transpose() * basis;
  gram.diagonal().array() += 1e-9;
  Eigen::VectorXd w = gram.ldlt().solve(basis.transpose() * target);
  w = w.cwiseMax(1e-6 / M);
  w /= w.sum();

  b.head(M) = w.array().log();
  b.segment(M, M) = log_a;
  b.tail(M) = knots;
  return b;
}

}  // namespace

TransportStack make_stack(const StackSpec& spec) {
  if (spec.dim < 1) throw std::invalid_argument("stack: dim must be >= 1");
  if (spec.n_layers < 1) throw std::invalid_argument("stack: need at least one layer");
  if (spec.cond_hidden < 1) throw std::invalid_argument("stack: cond_hidden must be >= 1");
  TransportStack stack;
  stack.layers.reserve(static_cast<std::size_t>(spec.n_layers));
  for (int j = 0; j < spec.n_layers; ++j) {
    TriangularLayer layer;
    layer.kind = spec.kind;
    layer.first_dim_params = Eigen::VectorXd::Zero(first_dim_param_count(spec.kind));
    for (int k = 2; k <= spec.dim; ++k) {
      ConditionalNet net;
      net.weights_in = Eigen::MatrixXd::Zero(spec.cond_hidden, k - 1);
      net.bias_in = Eigen::VectorXd::Zero(spec.cond_hidden);
      net.weights_out = Eigen::MatrixXd::Zero(spec.kind.param_count(), spec.cond_hidden);
      net.bias_out = Eigen::VectorXd::Zero(spec.kind.param_count());
      layer.cond_nets.push_back(std::move(net));
    }
    stack.layers.push_back(std::move(layer));
  }
  return stack;
}

void init_stack(TransportStack& stack, std::uint64_t seed) {
  rng::Engine eng = rng::make_engine(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const int n_layers = stack.n_layers();
  for (auto& layer : stack.layers) {
    layer.first_dim_params = gentle_bias(layer.kind, n_layers, eng);
    for (auto& net : layer.cond_nets) {
      const double s_in = 1.0 / std::sqrt(static_cast<double>(net.input_dim()));
      const double s_out = 1.0 / std::sqrt(static_cast<double>(net.hidden_width()));
      for (int r = 0; r < net.weights_in.rows(); ++r)
        for (int c = 0; c < net.weights_in.cols(); ++c)
          net.weights_in(r, c) = s_in * unif(eng);
      net.bias_in.setZero();
      for (int r = 0; r < net.weights_out.rows(); ++r)
        for (int c = 0; c < net.weights_out.cols(); ++c)
          net.weights_out(r, c) = s_out * unif(eng);
      net.bias_out = gentle_bias(layer.kind, n_layers, eng);
    }
  }
}

ad::ParamLayout make_param_layout(const StackSpec& spec) {
  ad::ParamLayout layout;
  const int m = spec.kind.param_count();
  for (int j = 0; j < spec.n_layers; ++j) {
    layout.add({j, 0, static_cast<int>(ad::ParamGroup::SublayerTheta)}, m);
    for (int k = 1; k < spec.dim; ++k) {
      layout.add({j, k, static_cast<int>(ad::ParamGroup::CondWeightsIn)},
                 spec.cond_hidden * k);
      layout.add({j, k, static_cast<int>(ad::ParamGroup::CondBiasIn)}, spec.cond_hidden);
      layout.add({j, k, static_cast<int>(ad::ParamGroup::CondWeightsOut)},
                 m * spec.cond_hidden);
      layout.add({j, k, static_cast<int>(ad::ParamGroup::CondBiasOut)}, m);
    }
  }
  return layout;
}

Eigen::VectorXd pack_params(const TransportStack& stack, const ad::ParamLayout& layout) {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(layout.size());
  for (int j = 0; j < stack.n_layers(); ++j) {
    const TriangularLayer& layer = stack.layers[static_cast<std::size_t>(j)];
    {
      const auto s = layout.at({j, 0, static_cast<int>(ad::ParamGroup::SublayerTheta)});
      values.segment(s.offset, s.len) = layer.first_dim_params;
    }
    for (int k = 1; k < layer.dim(); ++k) {
      const ConditionalNet& net = layer.cond_nets[static_cast<std::size_t>(k - 1)];
      auto s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondWeightsIn)});
      // row-major rows so each hidden unit's weights form one contiguous run
      for (int r = 0; r < net.weights_in.rows(); ++r)
        values.segment(s.offset + r * net.input_dim(), net.input_dim()) =
            net.weights_in.row(r);
      s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondBiasIn)});
      values.segment(s.offset, s.len) = net.bias_in;
      s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondWeightsOut)});
      for (int r = 0; r < net.weights_out.rows(); ++r)
        values.segment(s.offset + r * net.hidden_width(), net.hidden_width()) =
            net.weights_out.row(r);
      s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondBiasOut)});
      values.segment(s.offset, s.len) = net.bias_out;
    }
  }
  return values;
}

TransportStack make_stack_from_params(const StackSpec& spec,
                                      Eigen::Ref<const Eigen::VectorXd> values) {
  const ad::ParamLayout layout = make_param_layout(spec);
  if (values.size() != layout.size())
    throw std::invalid_argument("stack: parameter vector size mismatch");
  TransportStack stack = make_stack(spec);
  for (int j = 0; j < spec.n_layers; ++j) {
    TriangularLayer& layer = stack.layers[static_cast<std::size_t>(j)];
    {
      const auto s = layout.at({j, 0, static_cast<int>(ad::ParamGroup::SublayerTheta)});
      layer.first_dim_params = values.segment(s.offset, s.len);
    }
    for (int k = 1; k < spec.dim; ++k) {
      ConditionalNet& net = layer.cond_nets[static_cast<std::size_t>(k - 1)];
      auto s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondWeightsIn)});
      for (int r = 0; r < net.weights_in.rows(); ++r)
        net.weights_in.row(r) = values.segment(s.offset + r * k, k);
      s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondBiasIn)});
      net.bias_in = values.segment(s.offset, s.len);
      s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondWeightsOut)});
      for (int r = 0; r < net.weights_out.rows(); ++r)
        net.weights_out.row(r) =
            values.segment(s.offset + r * spec.cond_hidden, spec.cond_hidden);
      s = layout.at({j, k, static_cast<int>(ad::ParamGroup::CondBiasOut)});
      net.bias_out = values.segment(s.offset, s.len);
    }
  }
  return stack;
}

Eigen::VectorXd naf_weights(Eigen::Ref<const Eigen::VectorXd> raw_w) {
  const double shift = raw_w.maxCoeff();
  Eigen::VectorXd w = (raw_w.array() - shift).exp();
  w /= w.sum();
  return w;
}

Eval1 sublayer_eval(double x, Eigen::Ref<const Eigen::VectorXd> raw,
                    const SublayerKind& kind) {
  if (raw.size() != kind.param_count())
    throw std::invalid_argument("sublayer: parameter count mismatch");
  switch (kind.family) {
    case SublayerKind::Family::AffineAutoregressive: {
      const double scale = std::exp(raw[1]);
      return {raw[0] + x * scale, scale};
    }
    case SublayerKind::Family::InverseAutoregressive: {
      const double gate = sigmoid(raw[1]);
      return {gate * x + (1.0 - gate) * raw[0], gate};
    }
    case SublayerKind::Family::Naf: {
      const int M = kind.naf_width;
      const Eigen::VectorXd w = naf_weights(raw.head(M));
      const Eigen::ArrayXd a = raw.segment(M, M).array().exp();
      const Eigen::ArrayXd t = a * x + raw.tail(M).array();
      Eigen::ArrayXd u(M);
      for (int i = 0; i < M; ++i) u[i] = sigmoid(t[i]);
      const double v = clamp_unit((w.array() * u).sum());
      const double s = std::log(v) - std::log1p(-v);
      const double inner = (w.array() * a * u * (1.0 - u)).sum();
      return {s, inner / (v * (1.0 - v))};
    }
  }
  throw std::invalid_argument("sublayer: unknown family");
}

Eigen::VectorXd condnet_forward(Eigen::Ref<const Eigen::VectorXd> x_prefix,
                                const ConditionalNet& net) {
  if (x_prefix.size() != net.input_dim())
    throw std::invalid_argument("conditional net: prefix length mismatch");
  Eigen::VectorXd h = net.weights_in * x_prefix + net.bias_in;
  for (int i = 0; i < h.size(); ++i) h[i] = sigmoid(h[i]);
  return net.weights_out * h + net.bias_out;
}

EmbedResult logit_embed(Eigen::Ref<const Eigen::VectorXd> x) {
  EmbedResult r;
  r.y.resize(x.size());
  for (int k = 0; k < x.size(); ++k) {
    if (x[k] < kUnitClamp || x[k] > 1.0 - kUnitClamp) ++t_logit_clamps;
    const double p = clamp_unit(x[k]);
    r.y[k] = std::log(p) - std::log1p(-p);
    r.log_jac += std::log(1.0 / p + 1.0 / (1.0 - p));
  }
  return r;
}

long logit_clamp_count() { return t_logit_clamps; }
void reset_logit_clamp_count() { t_logit_clamps = 0; }

MapResult layer_forward(Eigen::Ref<const Eigen::VectorXd> y, const TriangularLayer& layer) {
  if (y.size() != layer.dim())
    throw std::invalid_argument("layer: dimension mismatch");
  MapResult r;
  r.z.resize(y.size());
  for (int k = 0; k < y.size(); ++k) {
    const Eval1 e =
        k == 0 ? sublayer_eval(y[0], layer.first_dim_params, layer.kind)
               : sublayer_eval(y[k],
                               condnet_forward(y.head(k),
                                               layer.cond_nets[static_cast<std::size_t>(k - 1)]),
                               layer.kind);
    r.z[k] = e.value;
    r.log_det += std::log(e.deriv);
  }
  return r;
}

MapResult stack_forward(Eigen::Ref<const Eigen::VectorXd> y, const TransportStack& stack) {
  if (stack.n_layers() < 1) throw std::invalid_argument("stack: empty");
  MapResult r;
  r.z = y;
  for (const TriangularLayer& layer : stack.layers) {
    MapResult step = layer_forward(r.z, layer);
    r.z = std::move(step.z);
    r.log_det += step.log_det;
  }
  return r;
}

double log_process_density(Eigen::Ref<const Eigen::VectorXd> x_unit,
                           const TransportStack& stack) {
  const EmbedResult emb = logit_embed(x_unit);
  const MapResult map = stack_forward(emb.y, stack);
  const double out = log_std_normal_pdf(map.z) + map.log_det + emb.log_jac;
  if (!std::isfinite(out))
    throw NumericError("process density: non-finite log density");
  return out;
}

}  // namespace ppflow
