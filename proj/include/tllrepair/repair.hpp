#pragma once

// Construction and solution of the Local and Global repair programs, the
// repairTLL pipeline, and validation of a repaired network against the five
// repair-problem requirements.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tllrepair/bounds.hpp"
#include "tllrepair/dynamics.hpp"
#include "tllrepair/socp.hpp"
#include "tllrepair/tll.hpp"

namespace tllrepair {

struct RepairConfig {
  double margin_eps = 1e-3;      // clearance when exiting X_unsafe (Eq. 8 row)
  int ce_horizon = 2;            // counterexample horizon for validation
  bool enforce_global_safety_caps = true;
  double solver_tol = 1e-8;
  int solver_max_iter = 200000;
  double activation_margin = 1e-6; // strictness buffer on survival constraints
  int sup_samples = 12;
  int lipschitz_samples = 8;
  int validate_samples = 4; // per-axis grid for safe-set validation
};

/// Repaired active rows from the Local program plus per-halfspace diagnostics.
struct LocalRepair {
  Matrix W_rows; // m x n, repaired row per output
  Vector b_vals; // m
  int halfspace = -1;
  double objective = 0.0;
  Vector one_step_image;                // f(x_ce) + g(x_ce) u_bar(x_ce)
  double constraint_slack = 0.0;        // (h_i - eps) - G_i . image, >= 0 up to tol
  std::vector<std::string> row_status;  // per unsafe-set row
};

struct RepairResult {
  enum class Status { repaired, local_infeasible, global_infeasible, budget_infeasible };

  Status status = Status::budget_infeasible;
  std::string stage_message;
  TllNetwork repaired;
  ActivationPattern pattern;
  std::optional<LocalRepair> local;
  double global_objective = 0.0;
  BoundCertificate certificates;
  BoundFn beta_fn;
  BoundFn L_fn;
  OmegaNorms omega;
};

inline const char* status_name(RepairResult::Status s) {
  switch (s) {
    case RepairResult::Status::repaired: return "repaired";
    case RepairResult::Status::local_infeasible: return "local_infeasible";
    case RepairResult::Status::global_infeasible: return "global_infeasible";
    default: return "budget_infeasible";
  }
}

namespace detail {

inline void check_pattern(const TllNetwork& net, const ActivationPattern& pattern) {
  if (static_cast<int>(pattern.act.size()) != net.m() ||
      static_cast<int>(pattern.sel.size()) != net.m())
    throw std::invalid_argument("pattern arity does not match network outputs");
  for (int k = 0; k < net.m(); ++k) {
    const auto& out = net.outputs[k];
    const int act = pattern.act[k], sel = pattern.sel[k];
    if (act < 0 || act >= out.N() || sel < 0 || sel >= out.M())
      throw std::invalid_argument("pattern index out of range");
    bool member = false;
    for (int i : out.selectors[sel]) member |= (i == act);
    if (!member)
      throw std::invalid_argument("pattern inconsistent: act row not in its selector group");
  }
}

// Epigraph scalars t_w >= ||w|| and t_b >= |b| tied to the two affine budget
// inequalities beta(.,.) <= beta_max and L(.,.) <= L_max.
inline void add_bound_caps(socp::ConvexProgram& prog, int w_var, int b_var, int b_entry,
                           int b_entry_dim, const BoundFn& betaF, const BoundFn& LF,
                           double beta_max, double L_max, int n, const std::string& tag) {
  const int tw = prog.add_variable("tw_" + tag, 1);
  const int tb = prog.add_variable("tb_" + tag, 1);

  socp::Affine wvec(n);
  wvec.add(w_var, Matrix::Identity(n, n));
  socp::Affine tw_expr(1);
  tw_expr.add_row(tw, Vector::Ones(1));
  prog.add_cone(wvec, tw_expr);

  Vector pick = Vector::Zero(b_entry_dim);
  pick[b_entry] = 1.0;
  socp::Affine pos(1), neg(1);
  pos.add_row(b_var, pick).add_row(tw, Vector::Zero(1));
  pos.add_row(tb, -Vector::Ones(1));
  neg.add_row(b_var, -pick);
  neg.add_row(tb, -Vector::Ones(1));
  prog.add_ineq(pos);
  prog.add_ineq(neg);

  socp::Affine beta_cap(1);
  beta_cap.add_row(tw, Vector::Constant(1, betaF.c_w));
  beta_cap.add_row(tb, Vector::Constant(1, betaF.c_b));
  beta_cap.set_constant(betaF.c0 - beta_max);
  prog.add_ineq(beta_cap);

  socp::Affine L_cap(1);
  L_cap.add_row(tw, Vector::Constant(1, LF.c_w));
  L_cap.add_row(tb, Vector::Constant(1, LF.c_b));
  L_cap.set_constant(LF.c0 - L_max);
  prog.add_ineq(L_cap);
}

} // namespace detail

/// The Local program for one unsafe-set row: minimally alter the active rows
/// so the one-step image of x_ce clears that halfspace by margin_eps, under
/// the beta/L caps of Eqs. (17) and (19).
inline socp::ConvexProgram build_local_program(const DynamicsModel& model,
                                               const TllNetwork& net, const SafetySpec& spec,
                                               const Vector& x_ce,
                                               const ActivationPattern& pattern,
                                               const BoundFn& betaF, const BoundFn& LF,
                                               double beta_max, double L_max,
                                               int halfspace_index, double margin_eps) {
  detail::check_pattern(net, pattern);
  if (halfspace_index < 0 || halfspace_index >= spec.X_unsafe.rows())
    throw std::invalid_argument("build_local_program: halfspace index out of range");
  if (margin_eps <= 0.0) throw std::invalid_argument("build_local_program: margin must be > 0");

  const int n = net.n();
  const int m = net.m();
  socp::ConvexProgram prog;

  std::vector<int> w_vars(m), b_vars(m);
  for (int k = 0; k < m; ++k) {
    w_vars[k] = prog.add_variable("w" + std::to_string(k), n);
    b_vars[k] = prog.add_variable("b" + std::to_string(k), 1);
  }

  // objective: sum_k ||W_act - w|| + |b_act - b|
  for (int k = 0; k < m; ++k) {
    const auto& out = net.outputs[k];
    socp::Affine dw(n);
    dw.add(w_vars[k], -Matrix::Identity(n, n));
    dw.set_constant(out.W.row(pattern.act[k]).transpose().eval());
    prog.add_norm_objective(dw);
    socp::Affine db(1);
    db.add_row(b_vars[k], -Vector::Ones(1));
    db.set_constant(out.b[pattern.act[k]]);
    prog.add_norm_objective(db);
  }

  // Eq. (8) convexified on one halfspace row:
  //   G_i . (f(x_ce) + g(x_ce) u_bar) <= h_i - eps
  const Vector fx = model.f(x_ce);
  const Matrix gx = model.g(x_ce);
  const Eigen::RowVectorXd Gi = spec.X_unsafe.G.row(halfspace_index);
  const Eigen::RowVectorXd gamma = Gi * gx; // 1 x m
  socp::Affine repair(1);
  for (int k = 0; k < m; ++k) {
    repair.add_row(w_vars[k], (gamma[k] * x_ce).eval());
    repair.add_row(b_vars[k], Vector::Constant(1, gamma[k]));
  }
  repair.set_constant(Gi.dot(fx) - spec.X_unsafe.h[halfspace_index] + margin_eps);
  prog.add_ineq(repair);

  // Eqs. (17), (19) per output
  for (int k = 0; k < m; ++k)
    detail::add_bound_caps(prog, w_vars[k], b_vars[k], 0, 1, betaF, LF, beta_max, L_max, n,
                           "local" + std::to_string(k));
  return prog;
}

/// Solve the Local program once per unsafe-set row (the complement of the
/// conjunction is a union of halfspaces) and keep the cheapest feasible one.
inline std::optional<LocalRepair> solve_local(const DynamicsModel& model,
                                              const TllNetwork& net, const SafetySpec& spec,
                                              const Vector& x_ce,
                                              const ActivationPattern& pattern,
                                              const BoundFn& betaF, const BoundFn& LF,
                                              double beta_max, double L_max,
                                              const RepairConfig& config,
                                              std::vector<std::string>* diagnostics = nullptr) {
  std::optional<LocalRepair> best;
  std::vector<std::string> row_status;
  for (int row = 0; row < spec.X_unsafe.rows(); ++row) {
    const auto prog = build_local_program(model, net, spec, x_ce, pattern, betaF, LF,
                                          beta_max, L_max, row, config.margin_eps);
    const auto sol = socp::solve(prog, config.solver_tol, config.solver_max_iter);
    row_status.push_back(socp::status_name(sol.status));
    if (sol.status != socp::Solution::Status::optimal) continue;
    if (!best || sol.objective < best->objective) {
      LocalRepair lr;
      lr.W_rows = Matrix(net.m(), net.n());
      lr.b_vals = Vector(net.m());
      for (int k = 0; k < net.m(); ++k) {
        lr.W_rows.row(k) = sol.value(2 * k).transpose();
        lr.b_vals[k] = sol.value(2 * k + 1)[0];
      }
      lr.halfspace = row;
      lr.objective = sol.objective;
      Vector u(net.m());
      for (int k = 0; k < net.m(); ++k) u[k] = lr.W_rows.row(k).dot(x_ce) + lr.b_vals[k];
      lr.one_step_image = model.f(x_ce) + model.g(x_ce) * u;
      lr.constraint_slack = spec.X_unsafe.h[row] - config.margin_eps -
                            spec.X_unsafe.G.row(row).dot(lr.one_step_image);
      best = std::move(lr);
    }
  }
  if (best) best->row_status = row_status;
  if (diagnostics) *diagnostics = row_status;
  return best;
}

/// iota_j = argmin over group j of the row values at x_ce (lowest outputs in
/// their min groups); ties to the lowest index. Entry at sel_k is the act row.
inline std::vector<std::vector<int>> choose_iota(const TllNetwork& net, const Vector& x_ce,
                                                 const ActivationPattern& pattern) {
  detail::check_pattern(net, pattern);
  std::vector<std::vector<int>> iota(net.m());
  for (int k = 0; k < net.m(); ++k) {
    const auto& out = net.outputs[k];
    const Vector v = row_values(out, x_ce);
    iota[k].resize(out.M());
    for (int j = 0; j < out.M(); ++j)
      iota[k][j] = tllrepair::detail::group_argmin(v, out.selectors[j]);
  }
  return iota;
}

/// The Global program: minimally alter the full linear layers so the repaired
/// active rows stay pinned and survive both lattice levels at x_ce.
inline socp::ConvexProgram build_global_program(const TllNetwork& net, const Vector& x_ce,
                                                const ActivationPattern& pattern,
                                                const LocalRepair& local,
                                                const std::vector<std::vector<int>>& iota,
                                                const BoundFn& betaF, const BoundFn& LF,
                                                double beta_max, double L_max,
                                                const RepairConfig& config) {
  detail::check_pattern(net, pattern);
  const int n = net.n();
  const int N = net.N();
  socp::ConvexProgram prog;

  std::vector<std::vector<int>> w_vars(net.m());
  std::vector<int> b_vars(net.m());
  for (int k = 0; k < net.m(); ++k) {
    for (int i = 0; i < N; ++i)
      w_vars[k].push_back(prog.add_variable("W" + std::to_string(k) + "_" + std::to_string(i), n));
    b_vars[k] = prog.add_variable("bvec" + std::to_string(k), N);
  }

  for (int k = 0; k < net.m(); ++k) {
    const auto& out = net.outputs[k];
    const int act = pattern.act[k];
    const int sel = pattern.sel[k];

    // objective: ||W - Wbar||_F + ||b - bbar||
    socp::Affine dW(N * n);
    Vector constW(N * n);
    for (int i = 0; i < N; ++i) {
      Matrix coeff = Matrix::Zero(N * n, n);
      coeff.block(i * n, 0, n, n) = -Matrix::Identity(n, n);
      dW.add(w_vars[k][i], coeff);
      constW.segment(i * n, n) = out.W.row(i).transpose();
    }
    dW.set_constant(constW);
    prog.add_norm_objective(dW);

    socp::Affine db(N);
    db.add(b_vars[k], -Matrix::Identity(N, N));
    db.set_constant(out.b);
    prog.add_norm_objective(db);

    // pin the repaired active row
    socp::Affine pin_w(n);
    pin_w.add(w_vars[k][act], Matrix::Identity(n, n));
    pin_w.set_constant((-local.W_rows.row(k).transpose()).eval());
    prog.add_eq(pin_w);
    Vector pick = Vector::Zero(N);
    pick[act] = 1.0;
    socp::Affine pin_b(1);
    pin_b.add_row(b_vars[k], pick);
    pin_b.set_constant(-local.b_vals[k]);
    prog.add_eq(pin_b);

    // (i) act survives its min group: act value <= member value at x_ce
    for (int i : out.selectors[sel]) {
      if (i == act) continue;
      socp::Affine cmp(1);
      cmp.add_row(w_vars[k][act], x_ce);
      cmp.add_row(w_vars[k][i], (-x_ce).eval());
      Vector bsel = Vector::Zero(N);
      bsel[act] = 1.0;
      bsel[i] -= 1.0;
      cmp.add_row(b_vars[k], bsel);
      cmp.set_constant(config.activation_margin);
      prog.add_ineq(cmp);
    }
    // (ii) every other min group is dragged below via its iota row
    for (int j = 0; j < out.M(); ++j) {
      if (j == sel) continue;
      const int io = iota[k][j];
      if (io == act) continue; // act itself already attains the value
      socp::Affine cmp(1);
      cmp.add_row(w_vars[k][io], x_ce);
      cmp.add_row(w_vars[k][act], (-x_ce).eval());
      Vector bsel = Vector::Zero(N);
      bsel[io] = 1.0;
      bsel[act] -= 1.0;
      cmp.add_row(b_vars[k], bsel);
      cmp.set_constant(config.activation_margin);
      prog.add_ineq(cmp);
    }

    if (config.enforce_global_safety_caps) {
      for (int i = 0; i < N; ++i)
        detail::add_bound_caps(prog, w_vars[k][i], b_vars[k], i, N, betaF, LF, beta_max,
                               L_max, n, std::to_string(k) + "_" + std::to_string(i));
    }
  }
  return prog;
}

/// Solve Global and assemble the repaired network; selector sets untouched,
/// active rows carried over bit-exactly from the Local solution.
inline std::optional<std::pair<TllNetwork, double>> solve_global(
    const TllNetwork& net, const Vector& x_ce, const ActivationPattern& pattern,
    const LocalRepair& local, const std::vector<std::vector<int>>& iota, const BoundFn& betaF,
    const BoundFn& LF, double beta_max, double L_max, const RepairConfig& config) {
  const auto prog =
      build_global_program(net, x_ce, pattern, local, iota, betaF, LF, beta_max, L_max, config);
  const auto sol = socp::solve(prog, config.solver_tol, config.solver_max_iter);
  if (sol.status != socp::Solution::Status::optimal) return std::nullopt;

  TllNetwork repaired = net;
  const int n = net.n();
  const int N = net.N();
  int var = 0;
  for (int k = 0; k < net.m(); ++k) {
    for (int i = 0; i < N; ++i) repaired.outputs[k].W.row(i) = sol.value(var++).transpose();
    repaired.outputs[k].b = sol.value(var++);
    repaired.outputs[k].W.row(pattern.act[k]) = local.W_rows.row(k);
    repaired.outputs[k].b[pattern.act[k]] = local.b_vals[k];
  }
  return std::make_pair(repaired, sol.objective);
}

/// Algorithm repairTLL: bounds, budgets, activation pattern, Local sweep,
/// iota selection, Global, assembly.
inline RepairResult repair_tll(const DynamicsModel& model, const TllNetwork& net,
                               const SafetySpec& spec, const Vector& x_ce,
                               const RepairConfig& config = {}) {
  net.validate();
  spec.validate();
  if (x_ce.size() != net.n() || model.n != net.n() || model.m != net.m())
    throw std::invalid_argument("repair_tll: dimension mismatch");
  if (spec.X_safe.contains(x_ce))
    throw std::invalid_argument("repair_tll: x_ce must lie outside X_safe");
  if (is_unsafe(spec.X_unsafe, x_ce))
    throw std::invalid_argument("repair_tll: x_ce must not already be unsafe");

  RepairResult result;
  result.repaired = net;
  result.pattern = active_indices(net, x_ce);

  const DynamicsModel resolved = resolve_lipschitz(model, spec.X_ws, config.lipschitz_samples);
  const SupEstimates sups = sampled_sups(resolved, spec.X_safe, config.sup_samples);
  result.beta_fn = make_beta_fn(resolved, spec, sups);
  result.L_fn = make_L_fn(resolved, spec, sups);
  result.omega = omega_norms(net);

  const double beta_max = result.beta_fn(result.omega.W, result.omega.b);
  const SafeDistance d = safe_distance(spec.X_safe, spec.X_unsafe);
  result.certificates.beta_max = beta_max;
  result.certificates.d_safe = d.value;

  if (d.intersects || d.value <= beta_max) {
    result.status = RepairResult::Status::budget_infeasible;
    std::ostringstream msg;
    msg << "budget: d_safe=" << d.value << " must exceed beta_max=" << beta_max;
    if (d.intersects) msg << " (X_safe intersects X_unsafe)";
    result.stage_message = msg.str();
    return result;
  }

  const double L_max = solve_Lmax(beta_max, d.value, spec.T);
  result.certificates.L_max = L_max;
  result.certificates.reach_radius = reach_bound(beta_max, L_max, spec.T);
  result.certificates.original_net_ok =
      check_original_bounds(net, result.beta_fn, result.L_fn, beta_max, L_max);
  if (!result.certificates.original_net_ok) {
    result.status = RepairResult::Status::local_infeasible;
    result.stage_message = "original network violates the L_max budget (Eq. 20)";
    return result;
  }

  std::vector<std::string> row_diag;
  auto local = solve_local(resolved, net, spec, x_ce, result.pattern, result.beta_fn,
                           result.L_fn, beta_max, L_max, config, &row_diag);
  if (!local) {
    result.status = RepairResult::Status::local_infeasible;
    std::ostringstream msg;
    msg << "local: every unsafe-set halfspace row is infeasible (";
    for (size_t i = 0; i < row_diag.size(); ++i)
      msg << (i ? ", " : "") << "row " << i + 1 << ": " << row_diag[i];
    msg << ")";
    result.stage_message = msg.str();
    return result;
  }
  result.local = local;

  const auto iota = choose_iota(net, x_ce, result.pattern);
  const auto global = solve_global(net, x_ce, result.pattern, *local, iota, result.beta_fn,
                                   result.L_fn, beta_max, L_max, config);
  if (!global) {
    result.status = RepairResult::Status::global_infeasible;
    result.stage_message = "global: activation program infeasible or not solved";
    return result;
  }

  result.repaired = global->first;
  result.global_objective = global->second;
  result.status = RepairResult::Status::repaired;
  result.stage_message = "repaired";
  return result;
}

struct ValidationReport {
  bool arch_ok = false;
  bool selectors_ok = false;
  bool ce_one_step_safe = false;
  bool ce_horizon_safe = false;
  bool safe_samples_ok = false;
  bool reach_bound_ok = false;
  double reach_radius_repaired = 0.0;
  double local_change = 0.0;
  double global_change = 0.0;

  bool all_pass() const {
    return arch_ok && selectors_ok && ce_one_step_safe && ce_horizon_safe &&
           safe_samples_ok && reach_bound_ok;
  }
};

/// Check the five repair-problem requirements on a (original, repaired) pair.
inline ValidationReport validate_repair(const DynamicsModel& model, const TllNetwork& original,
                                        const TllNetwork& repaired, const SafetySpec& spec,
                                        const Vector& x_ce, const ActivationPattern& pattern,
                                        const RepairConfig& config = {}) {
  ValidationReport report;
  original.validate();
  repaired.validate();

  report.arch_ok = original.n() == repaired.n() && original.m() == repaired.m() &&
                   original.N() == repaired.N() && original.M() == repaired.M();
  report.selectors_ok = report.arch_ok;
  if (report.arch_ok)
    for (int k = 0; k < original.m(); ++k)
      report.selectors_ok &= original.outputs[k].selectors == repaired.outputs[k].selectors;

  auto controller = [&repaired](const Vector& x) { return eval_lattice(repaired, x); };
  const Trajectory ce_traj = simulate(model, controller, x_ce, std::max(1, config.ce_horizon));
  report.ce_one_step_safe = !is_unsafe(spec.X_unsafe, ce_traj.states[1]);
  report.ce_horizon_safe = true;
  for (size_t i = 1; i < ce_traj.states.size(); ++i)
    report.ce_horizon_safe &= !is_unsafe(spec.X_unsafe, ce_traj.states[i]);

  const DynamicsModel resolved = resolve_lipschitz(model, spec.X_ws, config.lipschitz_samples);
  const SupEstimates sups = sampled_sups(resolved, spec.X_safe, config.sup_samples);
  const BoundFn betaF = make_beta_fn(resolved, spec, sups);
  const BoundFn LF = make_L_fn(resolved, spec, sups);
  const OmegaNorms omega_rep = omega_norms(repaired);
  report.reach_radius_repaired =
      reach_bound(betaF(omega_rep.W, omega_rep.b), LF(omega_rep.W, omega_rep.b), spec.T);

  report.safe_samples_ok = true;
  report.reach_bound_ok = true;
  detail::for_each_grid_point(spec.X_safe, config.validate_samples, [&](const Vector& x0) {
    const Trajectory traj = simulate(resolved, controller, x0, spec.T);
    for (size_t i = 1; i < traj.states.size(); ++i)
      report.safe_samples_ok &= !is_unsafe(spec.X_unsafe, traj.states[i]);
    report.reach_bound_ok &=
        (traj.states.back() - x0).norm() <= report.reach_radius_repaired + 1e-9;
  });

  for (int k = 0; k < original.m(); ++k) {
    const auto& a = original.outputs[k];
    const auto& b = repaired.outputs[k];
    if (pattern.act[k] >= 0 && pattern.act[k] < a.N()) {
      report.local_change += (a.W.row(pattern.act[k]) - b.W.row(pattern.act[k])).norm() +
                             std::abs(a.b[pattern.act[k]] - b.b[pattern.act[k]]);
    }
    report.global_change += (a.W - b.W).norm() + (a.b - b.b).norm();
  }
  return report;
}

} // namespace tllrepair
