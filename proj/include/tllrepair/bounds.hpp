#pragma once

// Safety-set geometry and reach-set bound machinery: the beta and L bound
// functions, network-wide Omega norms, the L_max root solve, the geometric
// reach bound, safe-set distance, and grid-search counterexample discovery.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tllrepair/dynamics.hpp"
#include "tllrepair/tll.hpp"

namespace tllrepair {

/// Unsafe set {x : G x >= h componentwise}.
struct Polytope {
  Matrix G;
  Vector h;

  int rows() const { return static_cast<int>(G.rows()); }
  int dim() const { return static_cast<int>(G.cols()); }

  void validate() const {
    if (G.rows() == 0 || G.cols() == 0 || h.size() != G.rows())
      throw std::invalid_argument("Polytope: inconsistent G/h");
  }

  bool contains(const Vector& x) const {
    if (x.size() != G.cols())
      throw std::invalid_argument("Polytope::contains: dimension mismatch");
    return ((G * x - h).array() >= 0.0).all();
  }
};

inline bool is_unsafe(const Polytope& unsafe, const Vector& x) {
  return unsafe.contains(x);
}

/// Affine bound c0 + c_w*||w|| + c_b*||b||, nondecreasing in both arguments.
struct BoundFn {
  double c0 = 0.0;
  double c_w = 0.0;
  double c_b = 0.0;

  double operator()(double w_norm, double b_norm) const {
    return c0 + c_w * w_norm + c_b * b_norm;
  }

  void validate() const {
    if (c0 < 0.0 || c_w < 0.0 || c_b < 0.0)
      throw std::invalid_argument("BoundFn: coefficients must be nonnegative");
  }
};

struct SafetySpec {
  Box X_ws;
  Box X_safe;
  Polytope X_unsafe;
  int T = 1;

  void validate() const {
    X_ws.validate();
    X_safe.validate();
    X_unsafe.validate();
    if (T < 1) throw std::invalid_argument("SafetySpec: horizon T must be >= 1");
    if (X_ws.dim() != X_safe.dim() || X_unsafe.dim() != X_ws.dim())
      throw std::invalid_argument("SafetySpec: dimension mismatch between sets");
    if (!X_safe.contained_in(X_ws))
      throw std::invalid_argument("SafetySpec: X_safe must lie inside X_ws");
  }
};

struct BoundCertificate {
  double beta_max = 0.0;
  double L_max = 0.0;
  double d_safe = 0.0;
  double reach_radius = 0.0;
  bool original_net_ok = false;
};

struct OmegaNorms {
  double W = 0.0; // max Euclidean row norm across all outputs
  double b = 0.0; // max |entry| across all bias vectors
};

struct SafeDistance {
  double value = 0.0; // certified lower bound (exact for one halfspace)
  bool intersects = false;
  double gap = 0.0; // upper bound minus lower bound
};

struct InfeasibleBudget : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// beta of Prop. 2 with the sup distributed across terms:
///   c0 = sup_{X_safe} ||f(x)-x||, c_w = sup||g|| * ext(X_ws), c_b = sup||g||.
/// `sups` must have been sampled over X_safe.
inline BoundFn make_beta_fn(const DynamicsModel& model, const SafetySpec& spec,
                            const SupEstimates& sups) {
  (void)model;
  BoundFn fn{sups.sup_f_minus_x, sups.sup_g_norm * box_ext(spec.X_ws), sups.sup_g_norm};
  fn.validate();
  return fn;
}

/// L of Eq. (11): c0 = L_f, c_w = L_g*sup||x|| + sup||g||, c_b = L_g,
/// with ||w|| constant under the sups and factored out.
inline BoundFn make_L_fn(const DynamicsModel& model, const SafetySpec& spec,
                         const SupEstimates& sups) {
  (void)spec;
  if (!model.lipschitz_known())
    throw std::invalid_argument("make_L_fn: model Lipschitz constants unresolved");
  BoundFn fn{model.L_f, model.L_g * sups.sup_x_norm + sups.sup_g_norm, model.L_g};
  fn.validate();
  return fn;
}

inline OmegaNorms omega_norms(const TllNetwork& net) {
  OmegaNorms omega;
  for (const auto& out : net.outputs) {
    for (int i = 0; i < out.N(); ++i) {
      omega.W = std::max(omega.W, out.W.row(i).norm());
      omega.b = std::max(omega.b, std::abs(out.b[i]));
    }
  }
  return omega;
}

namespace detail {

// Distance from a box to a single halfspace {g.x >= h}; +inf when the
// halfspace is empty (zero normal with h > 0).
inline double box_halfspace_distance(const Box& box, const Vector& g, double h) {
  const double gnorm = g.norm();
  if (gnorm == 0.0)
    return h > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  const double reach = affine_range(box, g, 0.0).second; // max of g.x over box
  return std::max(0.0, (h - reach) / gnorm);
}

// Dykstra's alternating projections onto the halfspace intersection.
inline Vector project_onto_polytope(const Polytope& P, const Vector& x0, int sweeps) {
  Vector x = x0;
  std::vector<Vector> corrections(P.rows(), Vector::Zero(x0.size()));
  for (int pass = 0; pass < sweeps; ++pass) {
    double moved = 0.0;
    for (int i = 0; i < P.rows(); ++i) {
      const Vector y = x + corrections[i];
      const Vector gi = P.G.row(i).transpose();
      const double gn2 = gi.squaredNorm();
      Vector projected = y;
      if (gn2 > 0.0) {
        const double viol = P.h[i] - gi.dot(y);
        if (viol > 0.0) projected = y + (viol / gn2) * gi;
      }
      corrections[i] = y - projected;
      moved += (projected - x).norm();
      x = projected;
    }
    if (moved < 1e-14) break;
  }
  // feasibility cleanup: cyclic projections until inside
  for (int pass = 0; pass < 10000; ++pass) {
    bool ok = true;
    for (int i = 0; i < P.rows(); ++i) {
      const Vector gi = P.G.row(i).transpose();
      const double gn2 = gi.squaredNorm();
      if (gn2 == 0.0) continue;
      const double viol = P.h[i] - gi.dot(x);
      if (viol > 1e-14) {
        x += (viol / gn2) * gi;
        ok = false;
      }
    }
    if (ok) break;
  }
  return x;
}

} // namespace detail

/// inf over x_s in box, x_u in P of ||x_s - x_u||. Exact (closed form) for a
/// single halfspace; otherwise the certified per-row lower bound is returned
/// as the value, with the alternating-projection upper bound reported via gap.
inline SafeDistance safe_distance(const Box& X_safe, const Polytope& X_unsafe) {
  X_safe.validate();
  X_unsafe.validate();
  if (X_safe.dim() != X_unsafe.dim())
    throw std::invalid_argument("safe_distance: dimension mismatch");

  double lower = 0.0;
  for (int i = 0; i < X_unsafe.rows(); ++i)
    lower = std::max(lower, detail::box_halfspace_distance(
                                X_safe, X_unsafe.G.row(i).transpose(), X_unsafe.h[i]));

  if (std::isinf(lower)) // empty unsafe set
    return {std::numeric_limits<double>::infinity(), false, 0.0};

  if (X_unsafe.rows() == 1) {
    SafeDistance d;
    d.value = lower;
    d.intersects = lower == 0.0;
    d.gap = 0.0;
    return d;
  }

  // Block coordinate descent between the box and the polytope.
  Vector xs = 0.5 * (X_safe.lower + X_safe.upper);
  Vector xu = detail::project_onto_polytope(X_unsafe, xs, 200);
  double upper = (xs - xu).norm();
  for (int iter = 0; iter < 500; ++iter) {
    xs = xu.cwiseMax(X_safe.lower).cwiseMin(X_safe.upper);
    xu = detail::project_onto_polytope(X_unsafe, xs, 200);
    const double d = (xs - xu).norm();
    if (upper - d < 1e-13) {
      upper = std::min(upper, d);
      break;
    }
    upper = d;
  }

  SafeDistance d;
  d.intersects = upper <= 1e-9;
  d.value = d.intersects ? 0.0 : lower;
  d.gap = std::max(0.0, upper - d.value);
  return d;
}

/// Geometric-sum reach bound beta * sum_{k=0}^{T} L^k.
inline double reach_bound(double beta_max, double L_max, int T) {
  if (T < 0) throw std::invalid_argument("reach_bound: T must be >= 0");
  double sum = 0.0, pw = 1.0;
  for (int k = 0; k <= T; ++k) {
    sum += pw;
    pw *= L_max;
  }
  return beta_max * sum;
}

/// Smallest L' > 0 with beta * sum_{k=0}^{T} L'^k = d, by bisection to 1e-9.
/// The left endpoint of the final bracket is returned, so plugging the result
/// back into reach_bound never exceeds d.
inline double solve_Lmax(double beta_max, double d, int T) {
  if (beta_max <= 0.0) throw std::invalid_argument("solve_Lmax: beta_max must be positive");
  if (T < 1) throw std::invalid_argument("solve_Lmax: T must be >= 1");
  if (d <= beta_max)
    throw InfeasibleBudget("solve_Lmax: d_safe <= beta_max, the k=0 term alone exhausts the budget");

  const double target = d / beta_max;
  double lo = 0.0;
  double hi = std::max(1.0, std::pow(target, 1.0 / T)) + 1.0;
  auto geom = [T](double L) {
    double sum = 0.0, pw = 1.0;
    for (int k = 0; k <= T; ++k) {
      sum += pw;
      pw *= L;
    }
    return sum;
  };
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    if (geom(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

/// Cor. 2 Eqs. (18)/(20) on the original network: beta and L evaluated at
/// (Omega_W, Omega_b) must not exceed the budgets.
inline bool check_original_bounds(const TllNetwork& net, const BoundFn& betaF,
                                  const BoundFn& LF, double beta_max, double L_max) {
  const OmegaNorms omega = omega_norms(net);
  return betaF(omega.W, omega.b) <= beta_max && LF(omega.W, omega.b) <= L_max;
}

/// Deterministic grid search for a Def. 5-style counterexample: a state in
/// X_ws, outside X_safe and X_unsafe, whose closed-loop trajectory enters
/// X_unsafe within ce_horizon steps. The scan is lexicographic, so the first
/// hit is the lexicographically smallest violating grid point.
inline std::optional<Vector> find_counterexample(const DynamicsModel& model,
                                                 const TllNetwork& net,
                                                 const SafetySpec& spec, int ce_horizon,
                                                 int grid,
                                                 const std::optional<Box>& search_box = {}) {
  if (ce_horizon < 1) throw std::invalid_argument("find_counterexample: ce_horizon >= 1");
  if (grid < 1) throw std::invalid_argument("find_counterexample: grid >= 1");
  const Box box = search_box.value_or(spec.X_ws);
  box.validate();

  auto controller = [&net](const Vector& x) { return eval_lattice(net, x); };

  std::optional<Vector> found;
  detail::for_each_grid_point(box, grid, [&](const Vector& x) {
    if (found) return;
    if (!spec.X_ws.contains(x)) return;
    if (spec.X_safe.contains(x)) return;
    if (is_unsafe(spec.X_unsafe, x)) return;
    Vector z = x;
    for (int k = 0; k < ce_horizon; ++k) {
      z = step(model, z, controller(z));
      if (is_unsafe(spec.X_unsafe, z)) {
        found = x;
        return;
      }
    }
  });
  return found;
}

} // namespace tllrepair
