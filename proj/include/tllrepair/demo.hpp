#pragma once

// Synthetic car scenario: the kinematic car with the published faulty affine
// controller installed as the active local linear function of a 50x10 TLL
// near the upper wall. The unsafe set carries a second (yaw) halfspace row:
// the car's position rows of g are zero, so a one-step repair can only act
// through the heading.

#include <cmath>
#include <random>
#include <string>

#include "tllrepair/bounds.hpp"
#include "tllrepair/dynamics.hpp"
#include "tllrepair/io.hpp"
#include "tllrepair/repair.hpp"
#include "tllrepair/tll.hpp"

namespace tllrepair::demo {

inline constexpr double kCarSpeed = 0.3;
inline constexpr double kSamplingPeriod = 0.01;
inline constexpr double kYawUnsafeThreshold = 0.106;
inline constexpr int kHorizon = 7;

inline Vector faulty_gain() {
  Vector w(3);
  w << -0.1442, -0.5424, -0.425;
  return w;
}
inline double faulty_bias() { return 2.223; }

inline Vector counterexample_state() {
  Vector x(3);
  x << 0.0, 2.999, 0.2;
  return x;
}

inline SafetySpec car_safety_spec() {
  SafetySpec spec;
  spec.X_ws.lower = Vector(3);
  spec.X_ws.upper = Vector(3);
  spec.X_ws.lower << -3.0, -4.0, -M_PI;
  spec.X_ws.upper << 3.0, 4.0, M_PI;
  spec.X_safe.lower = Vector(3);
  spec.X_safe.upper = Vector(3);
  spec.X_safe.lower << -0.25, -0.75, -M_PI / 8.0;
  spec.X_safe.upper << 0.25, -0.25, M_PI / 8.0;
  spec.X_unsafe.G = Matrix(2, 3);
  spec.X_unsafe.G << 0.0, 1.0, 0.0, //
      0.0, 0.0, 1.0;
  spec.X_unsafe.h = Vector(2);
  spec.X_unsafe.h << 3.0, kYawUnsafeThreshold;
  spec.T = kHorizon;
  spec.validate();
  return spec;
}

/// N=50, M=10 TLL whose active local controller at x_ce is the faulty gain.
/// Row 1 gates the faulty branch to the wall region, row 2 is a benign
/// steer-away baseline, row 3 pins Omega_W, row 4 is a low constant that
/// keeps the filler groups out of the max.
inline TllNetwork car_demo_network() {
  const int N = 50, M = 10, n = 3;
  ScalarTll out;
  out.W = Matrix::Zero(N, n);
  out.b = Vector::Zero(N);

  out.W.row(0) = faulty_gain().transpose();
  out.b[0] = faulty_bias();
  out.W.row(1) << 0.0, 0.9, 0.0;
  out.b[1] = -2.07;
  out.W.row(2) << 0.0, -0.28, -0.999;
  out.b[2] = 0.0;
  out.W.row(3) << 1.45, 0.0, 0.0;
  out.b[3] = 0.0;
  out.W.row(4).setZero();
  out.b[4] = -2.2;

  std::mt19937 rng(7);
  auto unit = [&rng]() { return static_cast<double>(rng()) / 4294967296.0; };
  for (int i = 5; i < N; ++i) {
    const double theta = M_PI * (unit() - 0.5);
    const double phi = 2.0 * M_PI * unit();
    const double radius = 0.2 + 0.8 * unit();
    out.W(i, 0) = radius * std::cos(theta) * std::cos(phi);
    out.W(i, 1) = radius * std::cos(theta) * std::sin(phi);
    out.W(i, 2) = radius * std::sin(theta);
    out.b[i] = -2.0 + 4.0 * unit();
  }

  out.selectors.push_back({0, 1});
  out.selectors.push_back({2});
  out.selectors.push_back({3, 4});
  for (int j = 0; j < M - 3; ++j) {
    std::vector<int> group;
    for (int i = 5 + j; i < N; i += M - 3) group.push_back(i);
    group.push_back(4);
    out.selectors.push_back(group);
  }

  TllNetwork net;
  net.outputs.push_back(std::move(out));
  net.validate();
  return net;
}

struct DemoScenario {
  DynamicsModel model;
  SafetySpec spec;
  TllNetwork net;
  Vector x_ce;
  Box search_box;
  int grid = 6;
  int ce_horizon = 2;
  int sim_steps = 50;
  RepairConfig config;
};

inline DemoScenario make_car_demo() {
  DemoScenario demo;
  demo.model = car_model(kCarSpeed, kSamplingPeriod);
  demo.spec = car_safety_spec();
  demo.net = car_demo_network();
  demo.x_ce = counterexample_state();
  demo.search_box.lower = Vector(3);
  demo.search_box.upper = Vector(3);
  demo.search_box.lower << 0.0, 2.99, 0.0;
  demo.search_box.upper << 0.0, 2.999, 0.2;
  return demo;
}

/// Write the scenario files consumed by the CLI subcommands.
inline void write_demo_files(const std::string& dir) {
  const DemoScenario demo = make_car_demo();
  io::save_json_file(dir + "/dynamics.json",
                     {{"model", "car"}, {"V", kCarSpeed}, {"ts", kSamplingPeriod}});
  io::save_json_file(dir + "/safety.json", io::safety_to_json(demo.spec));
  io::save_tll(dir + "/network.json", demo.net);
  io::save_json_file(dir + "/demo.json",
                     {{"x_ce", io::vector_to_json(demo.x_ce)},
                      {"search_box", io::box_to_json(demo.search_box)},
                      {"grid", demo.grid},
                      {"ce_horizon", demo.ce_horizon},
                      {"sim_steps", demo.sim_steps},
                      {"margin_eps", demo.config.margin_eps}});
}

} // namespace tllrepair::demo
