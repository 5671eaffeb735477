#include "ppflow/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppflow/grid.hpp"
#include "ppflow/rng.hpp"

namespace ppflow {

namespace {

using ad::NodeId;
using ad::ParamGroup;

int key_of(ParamGroup g) { return static_cast<int>(g); }

struct SublayerNodes {
  NodeId value;
  NodeId log_deriv;
};

// Emits the stack evaluation log η(T(y)) + log det ∇T(y) into a tape.
// Parameter nodes are created first so that node ids coincide with offsets
// in the flat parameter vector; every Dot therefore runs over contiguous
// parameter rows and contiguous computed blocks.
class StackEmitter {
 public:
  StackEmitter(ad::Tape& g, const StackSpec& spec, const ad::ParamLayout& layout)
      : g_(g), spec_(spec), layout_(layout) {}

  void build() {
    for (int i = 0; i < layout_.size(); ++i) g_.param();
    const NodeId input0 = g_.input();
    for (int k = 1; k < spec_.dim; ++k) g_.input();
    one_ = g_.constant(1.0);

    NodeId coords = input0;
    std::vector<NodeId> log_derivs;
    std::vector<NodeId> values(static_cast<std::size_t>(spec_.dim));
    for (int j = 0; j < spec_.n_layers; ++j) {
      for (int k = 0; k < spec_.dim; ++k) {
        NodeId raw0;
        if (k == 0) {
          raw0 = static_cast<NodeId>(
              layout_.at({j, 0, key_of(ParamGroup::SublayerTheta)}).offset);
        } else {
          raw0 = emit_condnet(j, k, coords);
        }
        const SublayerNodes sn = emit_sublayer(raw0, coords + k);
        values[static_cast<std::size_t>(k)] = sn.value;
        log_derivs.push_back(sn.log_deriv);
      }
      // lay the layer output down contiguously for the next layer's nets
      const NodeId block = g_.copy(values[0]);
      for (int k = 1; k < spec_.dim; ++k) g_.copy(values[static_cast<std::size_t>(k)]);
      coords = block;
    }

    const NodeId sq0 = g_.mul(coords, coords);
    for (int k = 1; k < spec_.dim; ++k) g_.mul(coords + k, coords + k);
    const NodeId ssum = g_.sum(sq0, spec_.dim);
    NodeId out = g_.add(g_.mul(ssum, g_.constant(-0.5)),
                        g_.constant(-0.5 * spec_.dim * kLogTwoPi));
    for (const NodeId t : log_derivs) out = g_.add(out, t);
    g_.set_output(out);
  }

 private:
  // Hidden layer and output head of the k-th conditional net; returns the
  // id of the first of m_k contiguous raw-parameter nodes.
  NodeId emit_condnet(int j, int k, NodeId prefix0) {
    const int h = spec_.cond_hidden;
    const int m = spec_.kind.param_count();
    const int win = layout_.at({j, k, key_of(ParamGroup::CondWeightsIn)}).offset;
    const int bin = layout_.at({j, k, key_of(ParamGroup::CondBiasIn)}).offset;
    const int wout = layout_.at({j, k, key_of(ParamGroup::CondWeightsOut)}).offset;
    const int bout = layout_.at({j, k, key_of(ParamGroup::CondBiasOut)}).offset;

    const NodeId pre0 = g_.dot(static_cast<NodeId>(win), prefix0, k);
    for (int i = 1; i < h; ++i) g_.dot(static_cast<NodeId>(win + i * k), prefix0, k);
    const NodeId act0 = g_.add(pre0, static_cast<NodeId>(bin));
    for (int i = 1; i < h; ++i) g_.add(pre0 + i, static_cast<NodeId>(bin + i));
    const NodeId hid0 = g_.sigmoid(act0);
    for (int i = 1; i < h; ++i) g_.sigmoid(act0 + i);
    const NodeId head0 = g_.dot(static_cast<NodeId>(wout), hid0, h);
    for (int o = 1; o < m; ++o) g_.dot(static_cast<NodeId>(wout + o * h), hid0, h);
    const NodeId raw0 = g_.add(head0, static_cast<NodeId>(bout));
    for (int o = 1; o < m; ++o) g_.add(head0 + o, static_cast<NodeId>(bout + o));
    return raw0;
  }

  SublayerNodes emit_sublayer(NodeId raw0, NodeId x) {
    switch (spec_.kind.family) {
      case SublayerKind::Family::AffineAutoregressive: {
        const NodeId scale = g_.exp(raw0 + 1);
        const NodeId value = g_.add(raw0, g_.mul(x, scale));
        return {value, raw0 + 1};  // log derivative is the raw scale itself
      }
      case SublayerKind::Family::InverseAutoregressive: {
        const NodeId gate = g_.sigmoid(raw0 + 1);
        const NodeId value =
            g_.add(g_.mul(gate, x), g_.mul(g_.sub(one_, gate), raw0));
        return {value, g_.log(gate)};
      }
      case SublayerKind::Family::Naf: {
        const int M = spec_.kind.naf_width;
        const NodeId ew0 = g_.exp(raw0);
        for (int i = 1; i < M; ++i) g_.exp(raw0 + i);
        const NodeId z = g_.sum(ew0, M);
        const NodeId w0 = g_.div(ew0, z);
        for (int i = 1; i < M; ++i) g_.div(ew0 + i, z);
        const NodeId a0 = g_.exp(raw0 + M);
        for (int i = 1; i < M; ++i) g_.exp(raw0 + M + i);
        const NodeId ax0 = g_.mul(a0, x);
        for (int i = 1; i < M; ++i) g_.mul(a0 + i, x);
        const NodeId t0 = g_.add(ax0, raw0 + 2 * M);
        for (int i = 1; i < M; ++i) g_.add(ax0 + i, raw0 + 2 * M + i);
        const NodeId u0 = g_.sigmoid(t0);
        for (int i = 1; i < M; ++i) g_.sigmoid(t0 + i);
        const NodeId v = g_.dot(w0, u0, M);
        const NodeId value = g_.logit(v);
        const NodeId c0 = g_.sub(one_, u0);
        for (int i = 1; i < M; ++i) g_.sub(one_, u0 + i);
        const NodeId p0 = g_.mul(u0, c0);
        for (int i = 1; i < M; ++i) g_.mul(u0 + i, c0 + i);
        const NodeId q0 = g_.mul(a0, p0);
        for (int i = 1; i < M; ++i) g_.mul(a0 + i, p0 + i);
        const NodeId inner = g_.dot(w0, q0, M);
        const NodeId log_deriv =
            g_.sub(g_.sub(g_.log(inner), g_.log(v)), g_.log(g_.sub(one_, v)));
        return {value, log_deriv};
      }
    }
    throw std::invalid_argument("sublayer: unknown family");
  }

  ad::Tape& g_;
  const StackSpec& spec_;
  const ad::ParamLayout& layout_;
  NodeId one_ = -1;
};

double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(mid) - 1, v.end());
    m = 0.5 * (m + v[mid - 1]);
  }
  return m;
}

}  // namespace

PointPattern pattern_from_points(Eigen::MatrixXd points) {
  PointPattern p;
  const int d = static_cast<int>(points.cols());
  p.bounds.padding = 0.0;
  if (points.rows() == 0) {
    p.bounds.lo = Eigen::VectorXd::Zero(d);
    p.bounds.hi = Eigen::VectorXd::Ones(d);
  } else {
    p.bounds.lo = points.colwise().minCoeff();
    p.bounds.hi = points.colwise().maxCoeff();
  }
  p.points = std::move(points);
  return p;
}

PointPattern normalize_pattern(const PointPattern& raw, double padding,
                               int* boundary_hits) {
  if (raw.n() < 1) throw DataError("normalize: empty pattern");
  if (raw.unit_scale)
    throw std::invalid_argument("normalize: pattern is already on the unit scale");
  if (!raw.points.allFinite()) throw DataError("normalize: non-finite coordinate");
  if (padding < 0.0) throw std::invalid_argument("normalize: negative padding");

  DomainBounds b{raw.bounds.lo, raw.bounds.hi, padding};
  for (int k = 0; k < b.dim(); ++k)
    if (!(b.hi[k] - b.lo[k] > 0.0))
      throw DataError("normalize: zero range in dimension " + std::to_string(k));

  const Eigen::VectorXd plo = b.padded_lo();
  const Eigen::VectorXd pr = b.padded_range();
  PointPattern out;
  out.points.resize(raw.n(), raw.dim());
  int hits = 0;
  for (int i = 0; i < raw.n(); ++i) {
    for (int k = 0; k < raw.dim(); ++k) {
      const double u = (raw.points(i, k) - plo[k]) / pr[k];
      if (u <= 0.0 || u >= 1.0) ++hits;
      out.points(i, k) = u;
    }
  }
  if (boundary_hits) *boundary_hits = hits;
  out.bounds = b;
  out.unit_scale = true;
  return out;
}

ObjectiveGraph::ObjectiveGraph(const StackSpec& spec, const PointPattern& unit_pattern)
    : layout_(make_param_layout(spec)) {
  if (!unit_pattern.unit_scale)
    throw std::invalid_argument("objective: pattern must be normalized first");
  if (unit_pattern.dim() != spec.dim)
    throw std::invalid_argument("objective: dimension mismatch");
  StackEmitter emitter(tape_, spec, layout_);
  emitter.build();

  const int n = unit_pattern.n();
  embedded_.resize(spec.dim, n);  // one column per point
  embed_jac_.resize(n);
  for (int i = 0; i < n; ++i) {
    const EmbedResult e = logit_embed(unit_pattern.points.row(i).transpose());
    embedded_.col(i) = e.y;
    embed_jac_[i] = e.log_jac;
  }
}

double ObjectiveGraph::nll(Eigen::Ref<const Eigen::VectorXd> params) {
  tape_.load_params(params);
  double total = 0.0;
  for (int i = 0; i < n_points(); ++i) {
    const double v = tape_.forward_inputs(embedded_.col(i));
    if (!std::isfinite(v))
      throw NumericError("objective: non-finite log density at point " + std::to_string(i));
    total += v + embed_jac_[i];
  }
  return -total;
}

double ObjectiveGraph::nll_grad(Eigen::Ref<const Eigen::VectorXd> params,
                                Eigen::VectorXd& grad) {
  grad = Eigen::VectorXd::Zero(layout_.size());
  tape_.load_params(params);
  double total = 0.0;
  bool finite = true;
  for (int i = 0; i < n_points(); ++i) {
    const double v = tape_.forward_inputs(embedded_.col(i));
    if (!std::isfinite(v))
      throw NumericError("objective: non-finite log density at point " + std::to_string(i));
    total += v + embed_jac_[i];
    finite = tape_.backward_accumulate(-1.0, grad) && finite;
  }
  if (!finite) throw NumericError("objective: non-finite gradient");
  return -total;
}

double ObjectiveGraph::nll_grad_subset(Eigen::Ref<const Eigen::VectorXd> params,
                                       const std::vector<int>& idx,
                                       Eigen::VectorXd& grad) {
  grad = Eigen::VectorXd::Zero(layout_.size());
  tape_.load_params(params);
  double total = 0.0;
  bool finite = true;
  for (const int i : idx) {
    const double v = tape_.forward_inputs(embedded_.col(i));
    if (!std::isfinite(v))
      throw NumericError("objective: non-finite log density at point " + std::to_string(i));
    total += v + embed_jac_[i];
    finite = tape_.backward_accumulate(-1.0, grad) && finite;
  }
  if (!finite) throw NumericError("objective: non-finite gradient");
  return -total;
}

double nll_objective(Eigen::Ref<const Eigen::VectorXd> params,
                     const PointPattern& unit_pattern, const StackSpec& spec) {
  ObjectiveGraph graph(spec, unit_pattern);
  return graph.nll(params);
}

FittedIntensity fit(const PointPattern& pattern, const FitConfig& config) {
  if (pattern.n() < 2) throw DataError("fit: insufficient data (need at least 2 points)");
  if (config.iterations < 1) throw std::invalid_argument("fit: iterations must be >= 1");
  if (!(config.learning_rate > 0.0))
    throw std::invalid_argument("fit: learning rate must be positive");
  if (config.batch < 0 || config.batch > pattern.n())
    throw std::invalid_argument("fit: bad batch size");

  const PointPattern unit =
      pattern.unit_scale ? pattern : normalize_pattern(pattern, config.padding);
  const StackSpec spec = config.stack_spec(unit.dim());

  TransportStack stack0 = make_stack(spec);
  init_stack(stack0, rng::derive_stream(config.seed, 0));
  const ad::ParamLayout layout = make_param_layout(spec);
  Eigen::VectorXd theta = pack_params(stack0, layout);

  ObjectiveGraph graph(spec, unit);
  const int n = unit.n();

  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd grad(theta.size());
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(config.iterations));

  rng::Engine batch_eng = rng::make_engine(rng::derive_stream(config.seed, 1));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // forces an initial shuffle
  std::vector<int> batch_idx;

  double b1t = 1.0, b2t = 1.0;
  for (int t = 0; t < config.iterations; ++t) {
    double obj;
    try {
      if (config.batch == 0 || config.batch == n) {
        obj = graph.nll_grad(theta, grad);
      } else {
        batch_idx.clear();
        for (int i = 0; i < config.batch; ++i) {
          if (cursor == order.size()) {
            std::shuffle(order.begin(), order.end(), batch_eng);
            cursor = 0;
          }
          batch_idx.push_back(order[cursor++]);
        }
        obj = graph.nll_grad_subset(theta, batch_idx, grad) *
              (static_cast<double>(n) / config.batch);
        grad *= static_cast<double>(n) / config.batch;
      }
    } catch (const NumericError& e) {
      throw NumericError("fit diverged at iteration " + std::to_string(t) + ": " + e.what());
    }
    trace.push_back(obj);

    b1t *= b1;
    b2t *= b2;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v.array().matrix() + (1.0 - b2) * grad.cwiseProduct(grad);
    const double mc = 1.0 / (1.0 - b1t), vc = 1.0 / (1.0 - b2t);
    theta.array() -=
        config.learning_rate * (mc * m.array()) / ((vc * v.array()).sqrt() + eps);
  }

  // early/late medians; a fit that ends above where it started is a failure
  const std::size_t span = std::max<std::size_t>(1, trace.size() / 10);
  const std::vector<double> head(trace.begin(), trace.begin() + static_cast<long>(span));
  const std::vector<double> tail(trace.end() - static_cast<long>(span), trace.end());
  if (median_of(tail) > median_of(head))
    throw NumericError("fit: objective did not decrease (late median above early median)");

  FittedIntensity out;
  out.spec = spec;
  out.stack = make_stack_from_params(spec, theta);
  out.mu_hat = static_cast<double>(n);
  out.bounds = unit.bounds;
  out.fit_trace = std::move(trace);
  out.meta = FitMeta{config.seed, config.iterations, graph.nll(theta)};
  return out;
}

double intensity_at(const FittedIntensity& model, Eigen::Ref<const Eigen::VectorXd> x) {
  if (x.size() != model.bounds.dim())
    throw std::invalid_argument("intensity_at: dimension mismatch");
  if (!model.bounds.contains(x))
    throw DataError("intensity_at: point outside the model domain");
  const Eigen::VectorXd u = model.bounds.to_unit(x);
  return model.mu_hat * std::exp(log_process_density(u, model.stack)) /
         model.bounds.volume_scale();
}

double kl_between(const IntensityFn& rho1, const IntensityFn& rho2,
                  const DomainBounds& domain, int resolution) {
  const GridDef grid = GridDef::over(domain, resolution);
  double diff = 0.0, cross = 0.0;
  for (long i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd x = grid.node(i);
    const double r1 = rho1(x);
    const double r2 = rho2(x);
    if (!(r2 > 0.0))
      throw NumericError("kl_between: rho2 non-positive at a grid node");
    if (r1 < 0.0) throw NumericError("kl_between: rho1 negative at a grid node");
    diff += r2 - r1;
    if (r1 > 0.0) cross += r1 * std::log(r1 / r2);
  }
  return (diff + cross) * grid.cell_volume();
}

}  // namespace ppflow
