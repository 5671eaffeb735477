#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ppflow/autodiff.hpp"

using namespace ppflow;
using ad::NodeId;
using ad::Tape;

namespace {

Eigen::VectorXd no_inputs() { return Eigen::VectorXd(0); }

// Hand-built sigmoid-mixture sublayer s = logit(sum_i w_i sigmoid(a_i x + b_i))
// over raw params [w_raw | a_raw | b], with x as the last parameter.
double build_naf_graph(Tape& g, int M) {
  std::vector<NodeId> params;
  for (int i = 0; i < 3 * M + 1; ++i) params.push_back(g.param());
  const NodeId x = params.back();
  const NodeId ew0 = g.exp(params[0]);
  for (int i = 1; i < M; ++i) g.exp(params[static_cast<std::size_t>(i)]);
  const NodeId z = g.sum(ew0, M);
  const NodeId w0 = g.div(ew0, z);
  for (int i = 1; i < M; ++i) g.div(ew0 + i, z);
  const NodeId a0 = g.exp(params[static_cast<std::size_t>(M)]);
  for (int i = 1; i < M; ++i) g.exp(params[static_cast<std::size_t>(M + i)]);
  const NodeId ax0 = g.mul(a0, x);
  for (int i = 1; i < M; ++i) g.mul(a0 + i, x);
  const NodeId t0 = g.add(ax0, params[static_cast<std::size_t>(2 * M)]);
  for (int i = 1; i < M; ++i) g.add(ax0 + i, params[static_cast<std::size_t>(2 * M + i)]);
  const NodeId u0 = g.sigmoid(t0);
  for (int i = 1; i < M; ++i) g.sigmoid(t0 + i);
  const NodeId v = g.dot(w0, u0, M);
  g.set_output(g.logit(v));
  return 0.0;
}

}  // namespace

TEST_CASE("square function value and gradient") {
  Tape g;
  const NodeId x = g.param();
  g.set_output(g.mul(x, x));
  Eigen::VectorXd theta(1);
  theta << 3.0;
  CHECK(g.forward_eval(theta, no_inputs()) == doctest::Approx(9.0));
  CHECK(g.backward_grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("sigmoid at zero") {
  Tape g;
  const NodeId t = g.param();
  g.set_output(g.sigmoid(t));
  Eigen::VectorXd theta(1);
  theta << 0.0;
  CHECK(g.forward_eval(theta, no_inputs()) == doctest::Approx(0.5));
  CHECK(g.backward_grad()[0] == doctest::Approx(0.25));
}

TEST_CASE("logit inverts sigmoid") {
  Tape g;
  const NodeId t = g.param();
  g.set_output(g.logit(g.sigmoid(t)));
  Eigen::VectorXd theta(1);
  theta << 1.7;
  CHECK(g.forward_eval(theta, no_inputs()) == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("inputs are separate from params") {
  Tape g;
  const NodeId p = g.param();
  const NodeId x = g.input();
  g.set_output(g.mul(p, x));
  Eigen::VectorXd theta(1), in(1);
  theta << 2.0;
  in << 5.0;
  CHECK(g.forward_eval(theta, in) == doctest::Approx(10.0));
  CHECK(g.backward_grad()[0] == doctest::Approx(5.0));
}

TEST_CASE("sublayer graph gradient matches finite differences") {
  const int M = 8;
  std::mt19937_64 eng(42);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Tape g;
    build_naf_graph(g, M);
    Eigen::VectorXd theta(3 * M + 1);
    for (int i = 0; i < theta.size(); ++i) theta[i] = unif(eng);
    g.forward_eval(theta, no_inputs());
    const Eigen::VectorXd grad = g.backward_grad();
    const Eigen::VectorXd fd = oracles::fd_gradient(
        [&](const Eigen::VectorXd& t) { return g.forward_eval(t, no_inputs()); }, theta);
    for (int i = 0; i < theta.size(); ++i) {
      if (std::abs(grad[i]) > 1e-8)
        CHECK(std::abs(grad[i] - fd[i]) / std::abs(grad[i]) <= 1e-5);
      else
        CHECK(std::abs(grad[i] - fd[i]) <= 1e-8);
    }
  }
}

TEST_CASE("every primitive matches finite differences on random graphs") {
  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Tape g;
    const int P = 4;
    std::vector<NodeId> pool;
    for (int i = 0; i < P; ++i) pool.push_back(g.param());
    const NodeId half = g.constant(0.5);
    std::uniform_int_distribution<int> pick_op(0, 8);
    std::uniform_int_distribution<std::size_t> pick_node(0, pool.size() - 1);
    NodeId acc = pool[0];
    for (int step = 0; step < 12; ++step) {
      pick_node = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1);
      const NodeId a = pool[pick_node(eng)];
      const NodeId b = pool[pick_node(eng)];
      NodeId made = -1;
      switch (pick_op(eng)) {
        case 0: made = g.add(a, b); break;
        case 1: made = g.sub(a, b); break;
        case 2: made = g.mul(a, b); break;
        case 3: made = g.div(a, g.add(g.sigmoid(b), half)); break;
        case 4: made = g.neg(a); break;
        case 5: made = g.exp(g.sigmoid(a)); break;
        case 6: made = g.log(g.add(g.sigmoid(a), half)); break;
        case 7: made = g.sigmoid(a); break;
        case 8: made = g.logit(g.sigmoid(a)); break;
      }
      pool.push_back(made);
      acc = g.add(acc, g.sigmoid(made));  // keep magnitudes tame
    }
    g.set_output(acc);

    Eigen::VectorXd theta(P);
    for (int i = 0; i < P; ++i) theta[i] = unif(eng);
    g.forward_eval(theta, no_inputs());
    const Eigen::VectorXd grad = g.backward_grad();
    const Eigen::VectorXd fd = oracles::fd_gradient(
        [&](const Eigen::VectorXd& t) { return g.forward_eval(t, no_inputs()); }, theta);
    for (int i = 0; i < P; ++i) {
      if (std::abs(grad[i]) > 1e-8)
        CHECK(std::abs(grad[i] - fd[i]) / std::abs(grad[i]) <= 1e-5);
      else
        CHECK(std::abs(grad[i] - fd[i]) <= 1e-8);
    }
  }
}

TEST_CASE("dot, sum and copy match finite differences") {
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Tape g;
    const int L = 3;
    std::vector<NodeId> params;
    for (int i = 0; i < 2 * L; ++i) params.push_back(g.param());
    const NodeId s0 = g.sigmoid(params[static_cast<std::size_t>(L)]);
    for (int i = 1; i < L; ++i) g.sigmoid(params[static_cast<std::size_t>(L + i)]);
    const NodeId d = g.dot(params[0], s0, L);
    const NodeId c0 = g.copy(params[1]);
    g.copy(params[2]);
    const NodeId s = g.sum(c0, 2);
    g.set_output(g.add(d, g.mul(s, s)));

    Eigen::VectorXd theta(2 * L);
    for (int i = 0; i < theta.size(); ++i) theta[i] = unif(eng);
    g.forward_eval(theta, no_inputs());
    const Eigen::VectorXd grad = g.backward_grad();
    const Eigen::VectorXd fd = oracles::fd_gradient(
        [&](const Eigen::VectorXd& t) { return g.forward_eval(t, no_inputs()); }, theta);
    for (int i = 0; i < theta.size(); ++i) {
      if (std::abs(grad[i]) > 1e-8)
        CHECK(std::abs(grad[i] - fd[i]) / std::abs(grad[i]) <= 1e-5);
      else
        CHECK(std::abs(grad[i] - fd[i]) <= 1e-8);
    }
  }
}

TEST_CASE("gradient is additive over graph outputs") {
  Tape g;
  const NodeId p0 = g.param();
  const NodeId p1 = g.param();
  const NodeId f = g.mul(g.sigmoid(p0), p1);
  const NodeId h = g.exp(g.mul(p0, g.sigmoid(p1)));
  const NodeId both = g.add(f, h);
  Eigen::VectorXd theta(2);
  theta << 0.7, -0.3;

  g.set_output(f);
  g.forward_eval(theta, no_inputs());
  const Eigen::VectorXd gf = g.backward_grad();
  g.set_output(h);
  g.forward_eval(theta, no_inputs());
  const Eigen::VectorXd gh = g.backward_grad();
  g.set_output(both);
  g.forward_eval(theta, no_inputs());
  const Eigen::VectorXd gsum = g.backward_grad();

  for (int i = 0; i < 2; ++i)
    CHECK(gsum[i] == doctest::Approx(gf[i] + gh[i]).epsilon(1e-12));
}

TEST_CASE("repeated evaluation is bit-identical") {
  Tape g;
  build_naf_graph(g, 6);
  Eigen::VectorXd theta = Eigen::VectorXd::LinSpaced(19, -0.9, 0.8);
  const double v1 = g.forward_eval(theta, no_inputs());
  const Eigen::VectorXd g1 = g.backward_grad();
  const double v2 = g.forward_eval(theta, no_inputs());
  const Eigen::VectorXd g2 = g.backward_grad();
  CHECK(v1 == v2);
  for (int i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("error paths") {
  Tape g;
  const NodeId p = g.param();
  g.set_output(g.log(p));

  SUBCASE("backward before forward") {
    CHECK_THROWS_AS(g.backward_grad(), std::invalid_argument);
  }
  SUBCASE("arity mismatch") {
    Eigen::VectorXd theta(2);
    theta << 1.0, 2.0;
    CHECK_THROWS_AS(g.forward_eval(theta, no_inputs()), std::invalid_argument);
  }
  SUBCASE("non-finite output") {
    Eigen::VectorXd theta(1);
    theta << -1.0;  // log of a negative number
    CHECK_THROWS_AS(g.forward_eval(theta, no_inputs()), NumericError);
  }
  SUBCASE("params after computed nodes are rejected") {
    CHECK_THROWS_AS(g.param(), std::invalid_argument);
  }
}

TEST_CASE("param layout is a bijection") {
  ad::ParamLayout layout;
  const auto s1 = layout.add({0, 0, 0}, 3);
  const auto s2 = layout.add({0, 1, 2}, 5);
  CHECK(s1.offset == 0);
  CHECK(s2.offset == 3);
  CHECK(layout.size() == 8);
  CHECK(layout.at({0, 1, 2}).len == 5);
  CHECK_THROWS_AS(layout.add({0, 0, 0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(layout.at({9, 9, 9}), std::invalid_argument);
}
