#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tllrepair/dynamics.hpp"

using namespace tllrepair;

namespace {

Vector vec3(double a, double b, double c) {
  Vector x(3);
  x << a, b, c;
  return x;
}

Box workspace_box() {
  Box box;
  box.lower = vec3(-3.0, -4.0, -M_PI);
  box.upper = vec3(3.0, 4.0, M_PI);
  return box;
}

Box safe_box() {
  Box box;
  box.lower = vec3(-0.25, -0.75, -M_PI / 8.0);
  box.upper = vec3(0.25, -0.25, M_PI / 8.0);
  return box;
}

// The published faulty affine controller.
Vector faulty_u(const Vector& x) {
  Vector u(1);
  u[0] = -0.1442 * x[0] - 0.5424 * x[1] - 0.425 * x[2] + 2.223;
  return u;
}

} // namespace

TEST_CASE("car model single steps") {
  const DynamicsModel car = car_model(0.3, 0.01);
  Vector u0(1);
  u0 << 0.0;

  Vector next = step(car, vec3(0, 0, 0), u0);
  CHECK(next[0] == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(next[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(next[2] == doctest::Approx(0.0).epsilon(1e-12));

  next = step(car, vec3(0, 0, M_PI / 2), u0);
  CHECK(next[0] == doctest::Approx(0.0).scale(1).epsilon(1e-12));
  CHECK(next[1] == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(next[2] == doctest::Approx(M_PI / 2).epsilon(1e-12));

  Vector u(1);
  u << 0.51134;
  next = step(car, vec3(0, 2.999, 0.2), u);
  CHECK(next[1] == doctest::Approx(2.999596).epsilon(1e-9));
  CHECK(next[2] == doctest::Approx(0.2051134).epsilon(1e-12));
}

TEST_CASE("faulty affine controller violates safety at exactly step 2") {
  const DynamicsModel car = car_model(0.3, 0.01);
  const Trajectory traj = simulate(car, faulty_u, vec3(0.0, 2.999, 0.2), 5);
  CHECK(traj.states[1][1] < 3.0);
  CHECK(traj.states[2][1] > 3.0);
  CHECK(traj.states[2][1] == doctest::Approx(3.000207).epsilon(1e-6));
}

TEST_CASE("simulate basics") {
  const DynamicsModel car = car_model(0.3, 0.01);
  auto zero = [](const Vector&) { return Vector::Zero(1).eval(); };

  const Trajectory traj = simulate(car, zero, vec3(0, 0, 0), 10);
  REQUIRE(traj.states.size() == 11);
  for (int k = 0; k <= 10; ++k) {
    CHECK(traj.states[k][0] == doctest::Approx(0.003 * k).epsilon(1e-12));
    CHECK(traj.states[k][1] == 0.0);
    CHECK(traj.states[k][2] == 0.0);
  }

  const Trajectory one = simulate(car, faulty_u, vec3(0, 2.999, 0.2), 1);
  REQUIRE(one.states.size() == 2);
  CHECK((one.states[1] - step(car, one.states[0], faulty_u(one.states[0]))).norm() == 0.0);

  CHECK_THROWS_AS(simulate(car, zero, vec3(0, 0, 0), 0), std::invalid_argument);
}

TEST_CASE("car model metadata") {
  const DynamicsModel car = car_model(0.3, 0.01);
  const Matrix g = car.g(vec3(0.7, -1.0, 2.0));
  CHECK(g(0, 0) == 0.0);
  CHECK(g(1, 0) == 0.0);
  CHECK(g(2, 0) == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(car.L_g == 0.0);
  CHECK(car.L_f <= 1.003 + 1e-12);

  // the closed-form L_f upper-bounds the sampled Jacobian spectral norms
  const Box ws = workspace_box();
  double jac_max = 0.0;
  detail::for_each_grid_point(ws, 12, [&](const Vector& x) {
    Matrix J(3, 3);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      J.col(j) = (car.f(xp) - car.f(xm)) / (2.0 * h);
    }
    jac_max = std::max(jac_max, spectral_norm(J));
  });
  CHECK(jac_max <= car.L_f + 1e-9);

  CHECK_THROWS_AS(car_model(0.0, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(car_model(0.3, -1.0), std::invalid_argument);
}

TEST_CASE("sampled sups of the car model") {
  const DynamicsModel car = car_model(0.3, 0.01);
  const SupEstimates ws = sampled_sups(car, workspace_box(), 9);
  CHECK(ws.ext == doctest::Approx(std::sqrt(9.0 + 16.0 + M_PI * M_PI)).epsilon(1e-14));
  CHECK(ws.ext == doctest::Approx(5.9051).epsilon(1e-4));

  const SupEstimates safe = sampled_sups(car, safe_box(), 9);
  CHECK(safe.sup_f_minus_x == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(safe.sup_g_norm == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("grid monotonicity of sampled sups") {
  const DynamicsModel car = car_model(0.3, 0.01);
  const Box ws = workspace_box();
  const SupEstimates coarse = sampled_sups(car, ws, 5);
  const SupEstimates fine = sampled_sups(car, ws, 9); // nested grid
  CHECK(fine.sup_f_minus_x >= coarse.sup_f_minus_x);
  CHECK(fine.sup_g_norm >= coarse.sup_g_norm);
  CHECK(fine.sup_x_norm >= coarse.sup_x_norm);
}

TEST_CASE("sampled Lipschitz estimates") {
  const DynamicsModel car = car_model(0.3, 0.01);
  const LipschitzEstimates car_est = sampled_lipschitz(car, workspace_box(), 6);
  CHECK(car_est.L_g == 0.0);
  CHECK(car_est.L_f >= 1.0);
  CHECK(car_est.L_f <= 1.054);

  const DynamicsModel lin =
      linear_model(2.0 * Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2));
  Box box;
  box.lower = Vector::Constant(2, -1.0);
  box.upper = Vector::Constant(2, 1.0);
  const LipschitzEstimates lin_est = sampled_lipschitz(lin, box, 5);
  CHECK(lin_est.L_f >= 2.0);
  CHECK(lin_est.L_f <= 2.1);

  Box flat = box;
  flat.upper[0] = flat.lower[0];
  CHECK_THROWS_AS(sampled_lipschitz(lin, flat, 5), std::invalid_argument);
  CHECK_THROWS_AS(sampled_lipschitz(lin, box, 1), std::invalid_argument);
}

TEST_CASE("trajectory reconstruction error stays at machine precision") {
  const DynamicsModel car = car_model(0.3, 0.01);
  oracles::Rng rng(606);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector w = oracles::random_point(rng, 3, 1.0);
    const double b = rng.uniform(-1.0, 1.0);
    auto controller = [&](const Vector& x) {
      Vector u(1);
      u[0] = w.dot(x) + b;
      return u;
    };
    const Vector x0 = oracles::random_point(rng, 3, 1.0);
    CHECK(trajectory_residual(car, simulate(car, controller, x0, 25)) <= 1e-12);
  }
}

TEST_CASE("closed-loop products obey the Lipschitz product bound") {
  const DynamicsModel car = car_model(0.3, 0.01);
  const Box ws = workspace_box();
  oracles::Rng rng(707);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector w = oracles::random_point(rng, 3, 2.0);
    const double b = rng.uniform(-2.0, 2.0);
    const auto [lo, hi] = affine_range(ws, w, b);
    const double sup_u = std::max(std::abs(lo), std::abs(hi));
    const double sup_g = 0.01;
    const double bound = car.L_g * sup_u + w.norm() * sup_g;

    double worst = 0.0;
    std::vector<Vector> pts;
    detail::for_each_grid_point(ws, 4, [&](const Vector& x) { pts.push_back(x); });
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = i + 1; j < pts.size(); ++j) {
        const Vector Fi = car.g(pts[i]) * Vector::Constant(1, w.dot(pts[i]) + b);
        const Vector Fj = car.g(pts[j]) * Vector::Constant(1, w.dot(pts[j]) + b);
        const double d = (pts[i] - pts[j]).norm();
        if (d > 0) worst = std::max(worst, (Fi - Fj).norm() / d);
      }
    CHECK(worst <= bound + 1e-9);
  }
}

TEST_CASE("box utilities") {
  const Box ws = workspace_box();
  CHECK(ws.contains(vec3(0, 0, 0)));
  CHECK_FALSE(ws.contains(vec3(0, 4.5, 0)));
  CHECK(safe_box().contained_in(ws));

  const auto [lo, hi] = affine_range(ws, vec3(1.0, -2.0, 0.0), 0.5);
  CHECK(lo == doctest::Approx(-3.0 - 8.0 + 0.5));
  CHECK(hi == doctest::Approx(3.0 + 8.0 + 0.5));

  Box bad;
  bad.lower = vec3(1, 0, 0);
  bad.upper = vec3(0, 1, 1);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dimension mismatches are input errors") {
  const DynamicsModel car = car_model(0.3, 0.01);
  Vector u(1);
  u << 0.0;
  Vector x2(2);
  x2 << 0.0, 0.0;
  CHECK_THROWS_AS(step(car, x2, u), std::invalid_argument);
  Vector u2(2);
  u2 << 0.0, 0.0;
  CHECK_THROWS_AS(step(car, vec3(0, 0, 0), u2), std::invalid_argument);
}
