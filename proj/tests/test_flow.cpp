#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ppflow/flow.hpp"

using namespace ppflow;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd random_raw(const SublayerKind& kind, std::mt19937_64& eng, double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Eigen::VectorXd raw(kind.param_count());
  for (int i = 0; i < raw.size(); ++i) raw[i] = unif(eng);
  return raw;
}

TransportStack random_stack(const StackSpec& spec, std::uint64_t seed) {
  TransportStack stack = make_stack(spec);
  init_stack(stack, seed);
  return stack;
}

}  // namespace

TEST_CASE("logit embedding values and Jacobian") {
  SUBCASE("midpoint") {
    const EmbedResult r = logit_embed(vec1(0.5));
    CHECK(r.y[0] == doctest::Approx(0.0));
    CHECK(r.log_jac == doctest::Approx(std::log(4.0)));
  }
  SUBCASE("two dimensions add Jacobians") {
    const EmbedResult r = logit_embed(vec2(0.5, 0.5));
    CHECK(r.y.norm() == doctest::Approx(0.0));
    CHECK(r.log_jac == doctest::Approx(2.0 * std::log(4.0)));
  }
  SUBCASE("off-center value against the derivative of the embedding") {
    const EmbedResult r = logit_embed(vec1(0.9));
    CHECK(r.y[0] == doctest::Approx(std::log(0.9 / 0.1)));
    CHECK(r.log_jac == doctest::Approx(std::log(1.0 / 0.9 + 1.0 / 0.1)));
    const double fd = oracles::fd_derivative(
        [](double x) { return std::log(x) - std::log1p(-x); }, 0.9);
    CHECK(r.log_jac == doctest::Approx(std::log(fd)).epsilon(1e-8));
  }
  SUBCASE("clamped coordinates are counted") {
    reset_logit_clamp_count();
    logit_embed(vec1(0.0));
    CHECK(logit_clamp_count() == 1);
    reset_logit_clamp_count();
  }
}

TEST_CASE("sublayer evaluation") {
  SUBCASE("single-component mixture with unit slope is the identity") {
    Eigen::VectorXd raw(3);
    raw << 0.4, 0.0, 0.0;  // any weight raw normalizes to w = 1
    const Eval1 e = sublayer_eval(0.7, raw, SublayerKind::naf(1));
    CHECK(e.value == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(e.deriv == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("affine family") {
    Eigen::VectorXd raw(2);
    raw << 1.0, std::log(2.0);
    const Eval1 e = sublayer_eval(3.0, raw, SublayerKind::affine());
    CHECK(e.value == doctest::Approx(7.0));
    CHECK(e.deriv == doctest::Approx(2.0));
  }
  SUBCASE("gated family averages input and location") {
    Eigen::VectorXd raw(2);
    raw << 4.0, 0.0;
    const Eval1 e = sublayer_eval(2.0, raw, SublayerKind::iaf());
    CHECK(e.value == doctest::Approx(3.0));
    CHECK(e.deriv == doctest::Approx(0.5));
  }
  SUBCASE("derivative matches finite differences") {
    std::mt19937_64 eng(3);
    const SublayerKind kind = SublayerKind::naf(8);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd raw = random_raw(kind, eng);
      const Eval1 e = sublayer_eval(0.3, raw, kind);
      const double fd = oracles::fd_derivative(
          [&](double x) { return sublayer_eval(x, raw, kind).value; }, 0.3);
      CHECK(std::abs(e.deriv - fd) / std::abs(e.deriv) <= 1e-6);
      CHECK(e.deriv > 0.0);
    }
  }
}

TEST_CASE("conditional network forward") {
  SUBCASE("zero network returns its output bias") {
    ConditionalNet net;
    net.weights_in = Eigen::MatrixXd::Zero(4, 2);
    net.bias_in = Eigen::VectorXd::Zero(4);
    net.weights_out = Eigen::MatrixXd::Zero(3, 4);
    net.bias_out.resize(3);
    net.bias_out << 0.3, -1.2, 5.0;
    const Eigen::VectorXd out = condnet_forward(vec2(5.0, -7.0), net);
    CHECK(out.isApprox(net.bias_out));
  }
  SUBCASE("one hidden unit at zero activation") {
    ConditionalNet net;
    net.weights_in = Eigen::MatrixXd::Zero(1, 1);
    net.bias_in = Eigen::VectorXd::Zero(1);
    net.weights_out = Eigen::MatrixXd::Constant(3, 1, 2.0);
    net.bias_out = Eigen::VectorXd::LinSpaced(3, -1.0, 1.0);
    const Eigen::VectorXd out = condnet_forward(vec1(123.0), net);
    for (int i = 0; i < 3; ++i)
      CHECK(out[i] == doctest::Approx(net.bias_out[i] + 1.0));  // 2 * sigmoid(0)
  }
  SUBCASE("random network against an explicit-loop oracle") {
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    ConditionalNet net;
    const int h = 64, m = 12, in = 3;
    net.weights_in.resize(h, in);
    net.bias_in.resize(h);
    net.weights_out.resize(m, h);
    net.bias_out.resize(m);
    for (int r = 0; r < h; ++r) {
      net.bias_in[r] = unif(eng);
      for (int c = 0; c < in; ++c) net.weights_in(r, c) = unif(eng);
    }
    for (int r = 0; r < m; ++r) {
      net.bias_out[r] = unif(eng);
      for (int c = 0; c < h; ++c) net.weights_out(r, c) = unif(eng);
    }
    Eigen::VectorXd x(in);
    for (int i = 0; i < in; ++i) x[i] = unif(eng);

    const Eigen::VectorXd out = condnet_forward(x, net);
    for (int o = 0; o < m; ++o) {
      double acc = net.bias_out[o];
      for (int r = 0; r < h; ++r) {
        double pre = net.bias_in[r];
        for (int c = 0; c < in; ++c) pre += net.weights_in(r, c) * x[c];
        acc += net.weights_out(o, r) / (1.0 + std::exp(-pre));
      }
      CHECK(std::abs(out[o] - acc) <= 1e-12);
    }
  }
  SUBCASE("prefix length mismatch") {
    ConditionalNet net;
    net.weights_in = Eigen::MatrixXd::Zero(2, 2);
    net.bias_in = Eigen::VectorXd::Zero(2);
    net.weights_out = Eigen::MatrixXd::Zero(3, 2);
    net.bias_out = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(condnet_forward(vec1(1.0), net), std::invalid_argument);
  }
}

TEST_CASE("layer forward") {
  SUBCASE("zero-parameter mixture layer is the identity map") {
    const TransportStack stack = make_stack({2, 1, SublayerKind::naf(1), 4});
    const MapResult r = layer_forward(vec2(0.3, -1.1), stack.layers[0]);
    CHECK(r.z[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(r.z[1] == doctest::Approx(-1.1).epsilon(1e-12));
    CHECK(r.log_det == doctest::Approx(0.0));
  }
  SUBCASE("one-dimensional affine layer") {
    TransportStack stack = make_stack({1, 1, SublayerKind::affine(), 4});
    stack.layers[0].first_dim_params << 1.0, std::log(2.0);
    const MapResult r = layer_forward(vec1(3.0), stack.layers[0]);
    CHECK(r.z[0] == doctest::Approx(7.0));
    CHECK(r.log_det == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("log determinant matches a finite-difference Jacobian") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const TransportStack stack = random_stack({2, 1, SublayerKind::naf(8), 8}, seed);
      const TriangularLayer& layer = stack.layers[0];
      const Eigen::VectorXd y = vec2(0.4, -0.2);
      const MapResult r = layer_forward(y, layer);
      // triangular Jacobian: the product of the two diagonal entries
      const double d0 = oracles::fd_derivative(
          [&](double t) { return layer_forward(vec2(t, y[1]), layer).z[0]; }, y[0]);
      const double d1 = oracles::fd_derivative(
          [&](double t) { return layer_forward(vec2(y[0], t), layer).z[1]; }, y[1]);
      CHECK(r.log_det == doctest::Approx(std::log(d0 * d1)).epsilon(1e-4));
    }
  }
}

TEST_CASE("stack forward") {
  SUBCASE("identity composition") {
    const TransportStack stack = make_stack({2, 3, SublayerKind::naf(4), 4});
    const Eigen::VectorXd y = vec2(0.25, -0.75);
    const MapResult r = stack_forward(y, stack);
    CHECK((r.z - y).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK(std::abs(r.log_det) <= 1e-10);
  }
  SUBCASE("two affine layers compose slopes") {
    TransportStack stack = make_stack({1, 2, SublayerKind::affine(), 4});
    stack.layers[0].first_dim_params << 0.0, std::log(2.0);
    stack.layers[1].first_dim_params << 0.0, std::log(3.0);
    const MapResult r = stack_forward(vec1(1.0), stack);
    CHECK(r.z[0] == doctest::Approx(6.0));
    CHECK(r.log_det == doctest::Approx(std::log(6.0)));
  }
  SUBCASE("two-layer log determinant matches finite differences") {
    for (std::uint64_t seed = 11; seed <= 15; ++seed) {
      const TransportStack stack = random_stack({2, 2, SublayerKind::naf(8), 8}, seed);
      const Eigen::VectorXd y = vec2(-0.6, 0.9);
      const MapResult r = stack_forward(y, stack);
      const double d0 = oracles::fd_derivative(
          [&](double t) { return stack_forward(vec2(t, y[1]), stack).z[0]; }, y[0]);
      const double d1 = oracles::fd_derivative(
          [&](double t) { return stack_forward(vec2(y[0], t), stack).z[1]; }, y[1]);
      CHECK(r.log_det == doctest::Approx(std::log(d0 * d1)).epsilon(1e-4));
    }
  }
}

TEST_CASE("log process density") {
  SUBCASE("identity stack at the midpoint") {
    const TransportStack stack = make_stack({1, 1, SublayerKind::naf(1), 4});
    const double expect = -0.5 * std::log(2.0 * M_PI) + std::log(4.0);
    CHECK(log_process_density(vec1(0.5), stack) == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("identity stack off center, closed form") {
    const TransportStack stack = make_stack({1, 1, SublayerKind::naf(1), 4});
    const double y = std::log(9.0);
    const double expect =
        -0.5 * (y * y + std::log(2.0 * M_PI)) + std::log(1.0 / 0.9 + 1.0 / 0.1);
    CHECK(log_process_density(vec1(0.9), stack) == doctest::Approx(expect).epsilon(1e-10));
  }
  SUBCASE("density integrates to one over the unit square") {
    for (std::uint64_t seed = 21; seed <= 23; ++seed) {
      const TransportStack stack = random_stack({2, 2, SublayerKind::naf(16), 16}, seed);
      const double mass = oracles::quadrature_2d(
          [&](double a, double b) { return std::exp(log_process_density(vec2(a, b), stack)); },
          0.0, 1.0, 0.0, 1.0, 256, 256);
      CHECK(mass == doctest::Approx(1.0).epsilon(0.02));
    }
  }
}

TEST_CASE("monotonicity in the own coordinate") {
  std::mt19937_64 eng(17);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  const SublayerKind kinds[] = {SublayerKind::naf(8), SublayerKind::affine(),
                                SublayerKind::iaf()};
  for (const SublayerKind& kind : kinds) {
    for (int trial = 0; trial < 1000; ++trial) {
      const Eigen::VectorXd raw = random_raw(kind, eng);
      double u = unif(eng), v = unif(eng);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      CHECK(sublayer_eval(u, raw, kind).value < sublayer_eval(v, raw, kind).value);
    }
  }
}

TEST_CASE("triangularity: later coordinates never feed earlier components") {
  std::mt19937_64 eng(19);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const TransportStack stack = random_stack({3, 2, SublayerKind::naf(4), 8}, 23);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd y(3);
    for (int k = 0; k < 3; ++k) y[k] = unif(eng);
    const MapResult base = stack_forward(y, stack);
    for (int k = 0; k < 2; ++k) {
      Eigen::VectorXd bumped = y;
      for (int kp = k + 1; kp < 3; ++kp) bumped[kp] += unif(eng);
      const MapResult r = stack_forward(bumped, stack);
      for (int c = 0; c <= k; ++c) CHECK(r.z[c] == base.z[c]);
    }
  }
}

TEST_CASE("mixture weights form a simplex") {
  std::mt19937_64 eng(29);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd raw(16);
    for (int i = 0; i < raw.size(); ++i) raw[i] = unif(eng);
    const Eigen::VectorXd w = naf_weights(raw);
    CHECK((w.array() > 0.0).all());
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("parameter packing round trip") {
  const StackSpec spec{2, 3, SublayerKind::naf(8), 16};
  const TransportStack stack = random_stack(spec, 31);
  const ad::ParamLayout layout = make_param_layout(spec);
  const Eigen::VectorXd packed = pack_params(stack, layout);
  const TransportStack rebuilt = make_stack_from_params(spec, packed);
  const Eigen::VectorXd repacked = pack_params(rebuilt, layout);
  CHECK(packed == repacked);
  const Eigen::VectorXd y = vec2(0.37, -0.81);
  CHECK(stack_forward(y, stack).z == stack_forward(y, rebuilt).z);
}

TEST_CASE("domain bounds mapping") {
  DomainBounds b;
  b.lo = vec2(10.0, -5.0);
  b.hi = vec2(20.0, 5.0);
  b.padding = 0.01;
  const Eigen::VectorXd x = vec2(15.0, 0.0);
  const Eigen::VectorXd u = b.to_unit(x);
  CHECK(u[0] == doctest::Approx(0.5));
  CHECK(u[1] == doctest::Approx(0.5));
  CHECK(b.from_unit(u).isApprox(x, 1e-12));
  CHECK(b.volume_scale() == doctest::Approx(10.0 * 1.02 * 10.0 * 1.02));
  CHECK(b.contains(vec2(10.0 - 0.05, 5.0)));
  CHECK(!b.contains(vec2(10.0 - 0.2, 5.0)));
}
