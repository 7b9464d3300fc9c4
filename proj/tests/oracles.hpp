#pragma once

// Test-only oracles, independent of the library implementation paths they
// check: a double-loop lattice evaluator with hand-rolled dot products, a
// portable random TLL generator, and closed-form projection formulas.

#include <cmath>
#include <random>
#include <vector>

#include "tllrepair/tll.hpp"

namespace oracles {

using tllrepair::Matrix;
using tllrepair::ScalarTll;
using tllrepair::TllNetwork;
using tllrepair::Vector;

/// Uniform doubles from raw mt19937 words; identical across platforms.
struct Rng {
  std::mt19937 gen;
  explicit Rng(unsigned seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(gen()) / 4294967296.0);
  }
  int uniform_int(int lo, int hi) { // inclusive
    return lo + static_cast<int>(gen() % static_cast<unsigned>(hi - lo + 1));
  }
};

inline TllNetwork random_tll(Rng& rng, int n, int N, int M, int m = 1,
                             double w_scale = 2.0, double b_scale = 1.0) {
  TllNetwork net;
  for (int k = 0; k < m; ++k) {
    ScalarTll out;
    out.W = Matrix(N, n);
    out.b = Vector(N);
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < n; ++j) out.W(i, j) = rng.uniform(-w_scale, w_scale);
      out.b[i] = rng.uniform(-b_scale, b_scale);
    }
    for (int j = 0; j < M; ++j) {
      const int size = rng.uniform_int(1, N);
      std::vector<int> sel;
      for (int s = 0; s < size; ++s) sel.push_back(rng.uniform_int(0, N - 1));
      std::sort(sel.begin(), sel.end());
      sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
      out.selectors.push_back(sel);
    }
    net.outputs.push_back(std::move(out));
  }
  net.validate();
  return net;
}

inline Vector random_point(Rng& rng, int n, double scale = 2.0) {
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.uniform(-scale, scale);
  return x;
}

/// Direct max-of-mins with explicit loops; no shared code with the library.
inline double lattice_oracle_scalar(const ScalarTll& out, const Vector& x) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& sel : out.selectors) {
    double group_min = std::numeric_limits<double>::infinity();
    for (int i : sel) {
      double v = out.b[i];
      for (int j = 0; j < out.n(); ++j) v += out.W(i, j) * x[j];
      if (v < group_min) group_min = v;
    }
    if (group_min > best) best = group_min;
  }
  return best;
}

inline Vector lattice_oracle(const TllNetwork& net, const Vector& x) {
  Vector y(net.m());
  for (int k = 0; k < net.m(); ++k) y[k] = lattice_oracle_scalar(net.outputs[k], x);
  return y;
}

/// Projection of w0 onto {w : a.w + b0 <= 0} and its distance.
inline std::pair<Vector, double> halfspace_projection(const Vector& w0, const Vector& a,
                                                      double b0) {
  const double viol = a.dot(w0) + b0;
  if (viol <= 0.0) return {w0, 0.0};
  const Vector w = w0 - (viol / a.squaredNorm()) * a;
  return {w, viol / a.norm()};
}

} // namespace oracles
