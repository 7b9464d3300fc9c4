#pragma once

// Discrete-time input-affine dynamics x+ = f(x) + g(x) u, closed-loop
// simulation, the four-wheel car model, axis-aligned boxes, and grid-sampled
// sup / Lipschitz estimates consumed by the bounds module.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tllrepair/tll.hpp"

namespace tllrepair {

enum class LipschitzSource { user, sampled, unknown };

struct DynamicsModel {
  int n = 0;
  int m = 0;
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> g; // n x m
  double L_f = std::numeric_limits<double>::quiet_NaN();
  double L_g = std::numeric_limits<double>::quiet_NaN();
  LipschitzSource lipschitz_source = LipschitzSource::unknown;
  std::string kind = "custom";

  bool lipschitz_known() const { return !std::isnan(L_f) && !std::isnan(L_g); }
};

struct Box {
  Vector lower;
  Vector upper;

  int dim() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (lower.size() != upper.size() || lower.size() == 0)
      throw std::invalid_argument("Box: bound dimension mismatch");
    for (int i = 0; i < dim(); ++i)
      if (lower[i] > upper[i]) throw std::invalid_argument("Box: lower > upper");
  }

  bool contains(const Vector& x, double tol = 0.0) const {
    if (x.size() != lower.size())
      throw std::invalid_argument("Box::contains: dimension mismatch");
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
    return true;
  }

  bool contained_in(const Box& other, double tol = 1e-12) const {
    if (other.dim() != dim()) return false;
    for (int i = 0; i < dim(); ++i)
      if (lower[i] < other.lower[i] - tol || upper[i] > other.upper[i] + tol)
        return false;
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= upper[i] - lower[i];
    return v;
  }
};

struct Trajectory {
  std::vector<Vector> states; // length steps + 1
  std::vector<Vector> inputs; // length steps
};

inline Vector step(const DynamicsModel& model, const Vector& x, const Vector& u) {
  if (x.size() != model.n)
    throw std::invalid_argument("step: state has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(model.n));
  if (u.size() != model.m)
    throw std::invalid_argument("step: input has dimension " + std::to_string(u.size()) +
                                ", expected " + std::to_string(model.m));
  return model.f(x) + model.g(x) * u;
}

inline Trajectory simulate(const DynamicsModel& model,
                           const std::function<Vector(const Vector&)>& controller,
                           const Vector& x0, int steps) {
  if (steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
  Trajectory traj;
  traj.states.reserve(steps + 1);
  traj.inputs.reserve(steps);
  traj.states.push_back(x0);
  Vector x = x0;
  for (int k = 0; k < steps; ++k) {
    const Vector u = controller(x);
    x = step(model, x, u);
    traj.inputs.push_back(u);
    traj.states.push_back(x);
  }
  return traj;
}

/// Max reconstruction error of the recursion x_{k+1} = f(x_k) + g(x_k) u_k.
inline double trajectory_residual(const DynamicsModel& model, const Trajectory& traj) {
  double worst = 0.0;
  for (size_t k = 0; k < traj.inputs.size(); ++k) {
    const Vector predicted = step(model, traj.states[k], traj.inputs[k]);
    worst = std::max(worst, (predicted - traj.states[k + 1]).norm());
  }
  return worst;
}

/// Kinematic car: position advances along the heading at speed V, the input
/// is the yaw rate. L_f = 1 + V*ts is a closed-form Lipschitz bound (the
/// (cos, sin) chord is no longer than the heading arc); g is constant.
inline DynamicsModel car_model(double V, double ts) {
  if (V <= 0.0 || ts <= 0.0)
    throw std::invalid_argument("car_model: V and ts must be positive");
  DynamicsModel model;
  model.n = 3;
  model.m = 1;
  model.f = [V, ts](const Vector& x) {
    Vector y(3);
    y[0] = x[0] + V * std::cos(x[2]) * ts;
    y[1] = x[1] + V * std::sin(x[2]) * ts;
    y[2] = x[2];
    return y;
  };
  Matrix G(3, 1);
  G << 0.0, 0.0, ts;
  model.g = [G](const Vector&) { return G; };
  model.L_f = 1.0 + V * ts;
  model.L_g = 0.0;
  model.lipschitz_source = LipschitzSource::user;
  model.kind = "car";
  return model;
}

/// f(x) = A x + c with constant input matrix G; L_f is the spectral norm of A.
inline DynamicsModel linear_model(const Matrix& A, const Vector& c, const Matrix& G) {
  if (A.rows() != A.cols() || A.rows() != c.size() || G.rows() != A.rows())
    throw std::invalid_argument("linear_model: inconsistent dimensions");
  DynamicsModel model;
  model.n = static_cast<int>(A.rows());
  model.m = static_cast<int>(G.cols());
  model.f = [A, c](const Vector& x) { return (A * x + c).eval(); };
  model.g = [G](const Vector&) { return G; };
  model.L_f = A.jacobiSvd().singularValues()(0);
  model.L_g = 0.0;
  model.lipschitz_source = LipschitzSource::user;
  model.kind = "linear";
  return model;
}

inline double spectral_norm(const Matrix& M) {
  return M.jacobiSvd().singularValues()(0);
}

/// ext of a box in closed form: the norm of the per-axis max magnitudes.
inline double box_ext(const Box& box) {
  box.validate();
  double sq = 0.0;
  for (int i = 0; i < box.dim(); ++i) {
    const double m = std::max(std::abs(box.lower[i]), std::abs(box.upper[i]));
    sq += m * m;
  }
  return std::sqrt(sq);
}

/// Range of w.x + b over a box, in closed form.
inline std::pair<double, double> affine_range(const Box& box, const Vector& w, double b) {
  if (w.size() != box.dim())
    throw std::invalid_argument("affine_range: dimension mismatch");
  double lo = b, hi = b;
  for (int i = 0; i < box.dim(); ++i) {
    if (w[i] >= 0.0) {
      lo += w[i] * box.lower[i];
      hi += w[i] * box.upper[i];
    } else {
      lo += w[i] * box.upper[i];
      hi += w[i] * box.lower[i];
    }
  }
  return {lo, hi};
}

namespace detail {

inline std::vector<double> axis_grid(double lo, double hi, int samples) {
  std::vector<double> pts;
  if (samples <= 1 || lo == hi) {
    pts.push_back(0.5 * (lo + hi));
    return pts;
  }
  for (int k = 0; k < samples; ++k)
    pts.push_back(lo + (hi - lo) * static_cast<double>(k) / (samples - 1));
  return pts;
}

template <typename Fn>
void for_each_grid_point(const Box& box, int samples, Fn&& fn) {
  const int n = box.dim();
  std::vector<std::vector<double>> axes(n);
  for (int i = 0; i < n; ++i) axes[i] = axis_grid(box.lower[i], box.upper[i], samples);
  std::vector<int> idx(n, 0);
  Vector x(n);
  while (true) {
    for (int i = 0; i < n; ++i) x[i] = axes[i][idx[i]];
    fn(x);
    int axis = n - 1;
    while (axis >= 0 && ++idx[axis] == static_cast<int>(axes[axis].size())) {
      idx[axis] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
}

template <typename Fn>
void for_each_corner(const Box& box, Fn&& fn) {
  const int n = box.dim();
  Vector x(n);
  for (long mask = 0; mask < (1L << n); ++mask) {
    for (int i = 0; i < n; ++i)
      x[i] = (mask >> i) & 1 ? box.upper[i] : box.lower[i];
    fn(x);
  }
}

} // namespace detail

struct SupEstimates {
  double sup_f_minus_x = 0.0; // sup ||f(x) - x||
  double sup_g_norm = 0.0;    // sup ||g(x)|| (spectral)
  double sup_x_norm = 0.0;    // sup ||x||
  double ext = 0.0;           // closed-form ext of the sampled box
};

/// Maxima over a deterministic per-axis grid plus the box corners; ext is
/// computed exactly. Order-independent (pure max reduction).
inline SupEstimates sampled_sups(const DynamicsModel& model, const Box& box, int samples) {
  if (samples < 1) throw std::invalid_argument("sampled_sups: samples must be >= 1");
  box.validate();
  SupEstimates est;
  auto visit = [&](const Vector& x) {
    est.sup_f_minus_x = std::max(est.sup_f_minus_x, (model.f(x) - x).norm());
    est.sup_g_norm = std::max(est.sup_g_norm, spectral_norm(model.g(x)));
    est.sup_x_norm = std::max(est.sup_x_norm, x.norm());
  };
  detail::for_each_grid_point(box, samples, visit);
  detail::for_each_corner(box, visit);
  est.ext = box_ext(box);
  return est;
}

struct LipschitzEstimates {
  double L_f = 0.0;
  double L_g = 0.0;
};

/// Max difference quotients of f and g over all grid-point pairs, inflated
/// by 1.05. An under-approximation by construction; provenance is sampled.
inline LipschitzEstimates sampled_lipschitz(const DynamicsModel& model, const Box& box,
                                            int samples) {
  if (samples < 2) throw std::invalid_argument("sampled_lipschitz: samples must be >= 2");
  box.validate();
  if (box.volume() <= 0.0)
    throw std::invalid_argument("sampled_lipschitz: degenerate (zero-volume) set");

  std::vector<Vector> pts;
  std::vector<Vector> fvals;
  std::vector<Matrix> gvals;
  detail::for_each_grid_point(box, samples, [&](const Vector& x) {
    pts.push_back(x);
    fvals.push_back(model.f(x));
    gvals.push_back(model.g(x));
  });

  LipschitzEstimates est;
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i] - pts[j]).norm();
      if (d <= 0.0) continue;
      est.L_f = std::max(est.L_f, (fvals[i] - fvals[j]).norm() / d);
      est.L_g = std::max(est.L_g, spectral_norm(gvals[i] - gvals[j]) / d);
    }
  est.L_f *= 1.05;
  est.L_g *= 1.05;
  return est;
}

/// Fill in L_f / L_g from grid sampling when the model does not supply them.
inline DynamicsModel resolve_lipschitz(const DynamicsModel& model, const Box& workspace,
                                       int samples) {
  if (model.lipschitz_known()) return model;
  DynamicsModel resolved = model;
  const LipschitzEstimates est = sampled_lipschitz(model, workspace, samples);
  if (std::isnan(resolved.L_f)) resolved.L_f = est.L_f;
  if (std::isnan(resolved.L_g)) resolved.L_g = est.L_g;
  resolved.lipschitz_source = LipschitzSource::sampled;
  return resolved;
}

} // namespace tllrepair
