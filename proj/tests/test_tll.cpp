#include <doctest.h>

#include "oracles.hpp"
#include "tllrepair/tll.hpp"

using namespace tllrepair;

namespace {

// |x| as a TLL: rows x and -x, two singleton groups.
TllNetwork abs_tll() {
  ScalarTll out;
  out.W = Matrix(2, 1);
  out.W << 1.0, -1.0;
  out.b = Vector::Zero(2);
  out.selectors = {{0}, {1}};
  TllNetwork net;
  net.outputs.push_back(out);
  return net;
}

Vector scalar(double v) {
  Vector x(1);
  x[0] = v;
  return x;
}

} // namespace

TEST_CASE("lattice evaluation of the absolute-value TLL") {
  const TllNetwork net = abs_tll();
  CHECK(eval_lattice(net, scalar(3.0))[0] == doctest::Approx(3.0));
  CHECK(eval_lattice(net, scalar(-2.0))[0] == doctest::Approx(2.0));
  CHECK(eval_lattice(net, scalar(0.0))[0] == doctest::Approx(0.0));
}

TEST_CASE("lattice evaluation matches the double-loop oracle") {
  oracles::Rng rng(101);
  const TllNetwork net = oracles::random_tll(rng, 2, 4, 2);
  for (int t = 0; t < 1000; ++t) {
    const Vector x = oracles::random_point(rng, 2);
    CHECK(eval_lattice(net, x)[0] ==
          doctest::Approx(oracles::lattice_oracle(net, x)[0]).epsilon(0).scale(1e-12));
  }
}

TEST_CASE("lowering the absolute-value TLL preserves semantics") {
  const TllNetwork net = abs_tll();
  const ReluLayerStack stack = lower_to_relu(net.outputs[0]);
  CHECK(stack.eval(scalar(3.0))[0] == doctest::Approx(3.0));
  CHECK(stack.eval(scalar(-2.0))[0] == doctest::Approx(2.0));
}

TEST_CASE("min-of-2 sub-network") {
  ScalarTll out;
  out.W = Matrix::Identity(2, 2);
  out.b = Vector::Zero(2);
  out.selectors = {{0, 1}};
  Vector x(2);
  x << 5.0, 2.0;
  CHECK(eval_lattice_scalar(out, x) == doctest::Approx(2.0));
  CHECK(lower_to_relu(out).eval(x)[0] == doctest::Approx(2.0));
}

TEST_CASE("lattice/layered equivalence on random networks") {
  oracles::Rng rng(202);
  const TllNetwork net = oracles::random_tll(rng, 3, 8, 4);
  const ReluLayerStack stack = lower_to_relu(net.outputs[0]);
  stack.validate();
  for (int t = 0; t < 1000; ++t) {
    const Vector x = oracles::random_point(rng, 3);
    CHECK(std::abs(stack.eval(x)[0] - eval_lattice(net, x)[0]) < 1e-9);
  }
}

TEST_CASE("active indices on the absolute-value TLL") {
  const TllNetwork net = abs_tll();
  auto p = active_indices(net, scalar(3.0));
  CHECK(p.act[0] == 0);
  CHECK(p.sel[0] == 0);
  p = active_indices(net, scalar(-2.0));
  CHECK(p.act[0] == 1);
  CHECK(p.sel[0] == 1);
  // tie at zero breaks to the lowest index
  p = active_indices(net, scalar(0.0));
  CHECK(p.act[0] == 0);
  CHECK(p.sel[0] == 0);
}

TEST_CASE("check_activation on the absolute-value TLL") {
  const TllNetwork net = abs_tll();
  CHECK(check_activation(net, scalar(3.0), ActivationPattern{{0}, {0}}));
  CHECK_FALSE(check_activation(net, scalar(3.0), ActivationPattern{{1}, {1}}));
}

TEST_CASE("activation soundness: named row reproduces the output exactly") {
  oracles::Rng rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniform_int(1, 3);
    const TllNetwork net =
        oracles::random_tll(rng, n, rng.uniform_int(2, 8), rng.uniform_int(1, 4));
    for (int t = 0; t < 50; ++t) {
      const Vector x = oracles::random_point(rng, n);
      const ActivationPattern p = active_indices(net, x);
      const Vector v = row_values(net.outputs[0], x);
      CHECK(v[p.act[0]] == eval_lattice(net, x)[0]); // bit-exact, same path
      CHECK(check_activation(net, x, p));
    }
  }
}

TEST_CASE("local-linear realization around a random point") {
  oracles::Rng rng(404);
  const TllNetwork net = oracles::random_tll(rng, 3, 6, 3);
  const Vector x = oracles::random_point(rng, 3);
  const ActivationPattern p = active_indices(net, x);
  const double delta = 1e-5;
  int matched = 0;
  for (int t = 0; t < 100; ++t) {
    Vector xp = x;
    for (int i = 0; i < 3; ++i) xp[i] += rng.uniform(-delta, delta);
    const ActivationPattern q = active_indices(net, xp);
    if (q.act != p.act) continue;
    ++matched;
    CHECK(eval_lattice(net, xp)[0] == row_values(net.outputs[0], xp)[p.act[0]]);
  }
  CHECK(matched > 0); // the ball is small enough that the pattern persists
}

TEST_CASE("operations leave selector sets untouched") {
  oracles::Rng rng(505);
  const TllNetwork net = oracles::random_tll(rng, 2, 5, 3);
  const auto selectors_before = net.outputs[0].selectors;
  const Vector x = oracles::random_point(rng, 2);
  (void)eval_lattice(net, x);
  (void)lower_to_relu(net.outputs[0]);
  (void)active_indices(net, x);
  (void)check_activation(net, x, active_indices(net, x));
  CHECK(net.outputs[0].selectors == selectors_before);
}

TEST_CASE("input validation") {
  const TllNetwork net = abs_tll();
  Vector bad(2);
  bad << 1.0, 2.0;
  CHECK_THROWS_AS(eval_lattice(net, bad), std::invalid_argument);

  ScalarTll broken;
  broken.W = Matrix(2, 1);
  broken.W << 1.0, -1.0;
  broken.b = Vector::Zero(2);
  broken.selectors = {{0}, {5}};
  CHECK_THROWS_AS(broken.validate(), std::invalid_argument);

  ScalarTll empty_sel = net.outputs[0];
  empty_sel.selectors[0].clear();
  CHECK_THROWS_AS(empty_sel.validate(), std::invalid_argument);
}
