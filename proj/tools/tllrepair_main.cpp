// Command-line front end: simulate closed loops, search for counterexamples,
// compute reach-bound certificates, run the repair pipeline, validate results,
// and generate the synthetic car demo scenario.
//
// Exit codes: 0 success, 2 input error, 3 infeasible (stage reported).

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tllrepair/bounds.hpp"
#include "tllrepair/demo.hpp"
#include "tllrepair/dynamics.hpp"
#include "tllrepair/io.hpp"
#include "tllrepair/repair.hpp"
#include "tllrepair/tll.hpp"

namespace {

using namespace tllrepair;

Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

int report_first_unsafe(const SafetySpec& spec, const Trajectory& traj) {
  for (size_t k = 0; k < traj.states.size(); ++k)
    if (is_unsafe(spec.X_unsafe, traj.states[k])) return static_cast<int>(k);
  return -1;
}

struct SimulateArgs {
  std::string dynamics, network, safety, out;
  std::vector<double> x0;
  int steps = 50;
};

int cmd_simulate(const SimulateArgs& args) {
  const DynamicsModel model = io::load_dynamics(args.dynamics);
  const TllNetwork net = io::load_tll(args.network);
  const Vector x0 = to_vector(args.x0);
  auto controller = [&net](const Vector& x) { return eval_lattice(net, x); };
  const Trajectory traj = simulate(model, controller, x0, args.steps);
  io::write_trajectory_csv(args.out, traj);
  std::cout << "wrote " << args.out << " (" << traj.states.size() << " rows)\n";
  if (!args.safety.empty()) {
    const SafetySpec spec = io::load_safety(args.safety);
    const int first = report_first_unsafe(spec, traj);
    if (first >= 0)
      std::cout << "first unsafe step: " << first << "\n";
    else
      std::cout << "no unsafe states within " << args.steps << " steps\n";
  }
  return 0;
}

struct FindCeArgs {
  std::string dynamics, network, safety, out;
  int grid = 10, horizon = 2;
  std::vector<double> box_lower, box_upper;
};

int cmd_find_ce(const FindCeArgs& args) {
  const DynamicsModel model = io::load_dynamics(args.dynamics);
  const TllNetwork net = io::load_tll(args.network);
  const SafetySpec spec = io::load_safety(args.safety);
  std::optional<Box> search;
  if (!args.box_lower.empty() || !args.box_upper.empty()) {
    Box box{to_vector(args.box_lower), to_vector(args.box_upper)};
    box.validate();
    search = box;
  }
  const auto ce = find_counterexample(model, net, spec, args.horizon, args.grid, search);
  nlohmann::json j;
  j["found"] = ce.has_value();
  j["ce_horizon"] = args.horizon;
  j["grid"] = args.grid;
  if (ce) {
    j["x_ce"] = io::vector_to_json(*ce);
    std::cout << "counterexample: " << io::vector_to_json(*ce).dump() << "\n";
  } else {
    std::cout << "no counterexample found on the grid\n";
  }
  if (!args.out.empty()) io::save_json_file(args.out, j);
  return 0;
}

struct BoundsArgs {
  std::string dynamics, network, safety, out;
  int samples = 12;
};

int cmd_bounds(const BoundsArgs& args) {
  const DynamicsModel model = io::load_dynamics(args.dynamics);
  const TllNetwork net = io::load_tll(args.network);
  const SafetySpec spec = io::load_safety(args.safety);

  const DynamicsModel resolved = resolve_lipschitz(model, spec.X_ws, 8);
  const SupEstimates sups = sampled_sups(resolved, spec.X_safe, args.samples);
  const BoundFn betaF = make_beta_fn(resolved, spec, sups);
  const BoundFn LF = make_L_fn(resolved, spec, sups);
  const OmegaNorms omega = omega_norms(net);
  const double beta_max = betaF(omega.W, omega.b);
  const SafeDistance d = safe_distance(spec.X_safe, spec.X_unsafe);

  nlohmann::json j;
  j["beta_fn"] = {{"c0", betaF.c0}, {"c_w", betaF.c_w}, {"c_b", betaF.c_b}};
  j["L_fn"] = {{"c0", LF.c0}, {"c_w", LF.c_w}, {"c_b", LF.c_b}};
  j["omega"] = {{"W", omega.W}, {"b", omega.b}};
  j["beta_max"] = beta_max;
  j["d_safe"] = d.value;
  j["d_safe_gap"] = d.gap;
  j["sets_intersect"] = d.intersects;
  j["Lf"] = resolved.L_f;
  j["Lg"] = resolved.L_g;
  j["lipschitz_source"] =
      resolved.lipschitz_source == LipschitzSource::sampled ? "sampled" : "user";
  if (!d.intersects && d.value > beta_max) {
    const double L_max = solve_Lmax(beta_max, d.value, spec.T);
    j["L_max"] = L_max;
    j["reach_radius"] = reach_bound(beta_max, L_max, spec.T);
    j["original_net_ok"] = check_original_bounds(net, betaF, LF, beta_max, L_max);
  } else {
    j["budget_infeasible"] = true;
  }
  std::cout << j.dump(2) << "\n";
  if (!args.out.empty()) io::save_json_file(args.out, j);
  return 0;
}

struct RepairArgs {
  std::string dynamics, network, safety, out_dir;
  std::vector<double> x_ce;
  double margin = 1e-3;
  int horizon = 2;
  int steps = 50;
  double tol = 1e-8;
  bool no_global_caps = false;
};

int cmd_repair(const RepairArgs& args) {
  const DynamicsModel model = io::load_dynamics(args.dynamics);
  const TllNetwork net = io::load_tll(args.network);
  const SafetySpec spec = io::load_safety(args.safety);
  const Vector x_ce = to_vector(args.x_ce);

  RepairConfig config;
  config.margin_eps = args.margin;
  config.ce_horizon = args.horizon;
  config.solver_tol = args.tol;
  config.enforce_global_safety_caps = !args.no_global_caps;

  std::filesystem::create_directories(args.out_dir);
  const std::string before_csv = args.out_dir + "/before.csv";
  const std::string after_csv = args.out_dir + "/after.csv";
  const std::string net_path = args.out_dir + "/repaired.json";
  const std::string report_path = args.out_dir + "/report.json";

  auto original_controller = [&net](const Vector& x) { return eval_lattice(net, x); };
  io::write_trajectory_csv(before_csv, simulate(model, original_controller, x_ce, args.steps));

  const RepairResult result = repair_tll(model, net, spec, x_ce, config);

  std::string after_written;
  if (result.status == RepairResult::Status::repaired) {
    io::save_tll(net_path, result.repaired);
    auto repaired_controller = [&result](const Vector& x) {
      return eval_lattice(result.repaired, x);
    };
    io::write_trajectory_csv(after_csv,
                             simulate(model, repaired_controller, x_ce, args.steps));
    after_written = after_csv;
  }
  io::save_json_file(report_path,
                     io::repair_report_to_json(result, before_csv, after_written,
                                               after_written.empty() ? "" : net_path));
  std::cout << "status: " << status_name(result.status) << "\n";
  if (result.status != RepairResult::Status::repaired) {
    std::cerr << "stage: " << result.stage_message << "\n";
    return 3;
  }
  std::cout << "local objective: " << result.local->objective
            << ", global objective: " << result.global_objective << "\n";
  std::cout << "report: " << report_path << "\n";
  return 0;
}

struct ValidateArgs {
  std::string dynamics, original, repaired, safety, out;
  std::vector<double> x_ce;
  int horizon = 2;
};

int cmd_validate(const ValidateArgs& args) {
  const DynamicsModel model = io::load_dynamics(args.dynamics);
  const TllNetwork original = io::load_tll(args.original);
  const TllNetwork repaired = io::load_tll(args.repaired);
  const SafetySpec spec = io::load_safety(args.safety);
  const Vector x_ce = to_vector(args.x_ce);

  RepairConfig config;
  config.ce_horizon = args.horizon;
  const ActivationPattern pattern = active_indices(original, x_ce);
  const ValidationReport report =
      validate_repair(model, original, repaired, spec, x_ce, pattern, config);
  const nlohmann::json j = io::validation_report_to_json(report);
  std::cout << j.dump(2) << "\n";
  if (!args.out.empty()) io::save_json_file(args.out, j);
  return report.all_pass() ? 0 : 3;
}

int cmd_demo_car(const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  demo::write_demo_files(out_dir);
  std::cout << "wrote scenario files to " << out_dir << "\n"
            << "try:\n"
            << "  tllrepair find-ce --dynamics " << out_dir << "/dynamics.json --network "
            << out_dir << "/network.json --safety " << out_dir
            << "/safety.json --grid 6 --horizon 2 \\\n"
            << "    --box-lower 0,2.99,0 --box-upper 0,2.999,0.2\n"
            << "  tllrepair repair --dynamics " << out_dir << "/dynamics.json --network "
            << out_dir << "/network.json --safety " << out_dir
            << "/safety.json --x-ce 0,2.999,0.2 --out-dir " << out_dir << "/run\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repair unsafe Two-Level Lattice controllers for input-affine systems"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a closed loop and write a CSV");
  sim_cmd->add_option("--dynamics", sim.dynamics, "dynamics config JSON")->required();
  sim_cmd->add_option("--network", sim.network, "TLL network JSON")->required();
  sim_cmd->add_option("--safety", sim.safety, "safety spec JSON (report unsafe steps)");
  sim_cmd->add_option("--x0", sim.x0, "initial state")->required()->delimiter(',');
  sim_cmd->add_option("--steps", sim.steps, "number of steps");
  sim_cmd->add_option("--out", sim.out, "output CSV path")->required();

  FindCeArgs fce;
  auto* fce_cmd = app.add_subcommand("find-ce", "grid-search for a safety counterexample");
  fce_cmd->add_option("--dynamics", fce.dynamics)->required();
  fce_cmd->add_option("--network", fce.network)->required();
  fce_cmd->add_option("--safety", fce.safety)->required();
  fce_cmd->add_option("--grid", fce.grid, "grid points per axis");
  fce_cmd->add_option("--horizon", fce.horizon, "counterexample horizon");
  fce_cmd->add_option("--box-lower", fce.box_lower, "search box lower corner")->delimiter(',');
  fce_cmd->add_option("--box-upper", fce.box_upper, "search box upper corner")->delimiter(',');
  fce_cmd->add_option("--out", fce.out, "report JSON path");

  BoundsArgs bnd;
  auto* bnd_cmd = app.add_subcommand("bounds", "compute beta/L bounds and the certificate");
  bnd_cmd->add_option("--dynamics", bnd.dynamics)->required();
  bnd_cmd->add_option("--network", bnd.network)->required();
  bnd_cmd->add_option("--safety", bnd.safety)->required();
  bnd_cmd->add_option("--samples", bnd.samples, "grid samples per axis");
  bnd_cmd->add_option("--out", bnd.out, "report JSON path");

  RepairArgs rep;
  auto* rep_cmd = app.add_subcommand("repair", "run the repair pipeline");
  rep_cmd->add_option("--dynamics", rep.dynamics)->required();
  rep_cmd->add_option("--network", rep.network)->required();
  rep_cmd->add_option("--safety", rep.safety)->required();
  rep_cmd->add_option("--x-ce", rep.x_ce, "counterexample state")->required()->delimiter(',');
  rep_cmd->add_option("--out-dir", rep.out_dir, "output directory")->required();
  rep_cmd->add_option("--margin", rep.margin, "unsafe-exit margin eps");
  rep_cmd->add_option("--horizon", rep.horizon, "counterexample horizon");
  rep_cmd->add_option("--steps", rep.steps, "before/after simulation steps");
  rep_cmd->add_option("--tol", rep.tol, "solver tolerance");
  rep_cmd->add_flag("--no-global-caps", rep.no_global_caps,
                    "drop beta/L caps on globally altered rows");

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("validate", "check a repaired network");
  val_cmd->add_option("--dynamics", val.dynamics)->required();
  val_cmd->add_option("--original", val.original)->required();
  val_cmd->add_option("--repaired", val.repaired)->required();
  val_cmd->add_option("--safety", val.safety)->required();
  val_cmd->add_option("--x-ce", val.x_ce)->required()->delimiter(',');
  val_cmd->add_option("--horizon", val.horizon);
  val_cmd->add_option("--out", val.out, "report JSON path");

  std::string demo_dir = "demo-car";
  auto* demo_cmd = app.add_subcommand("demo-car", "generate the synthetic car scenario");
  demo_cmd->add_option("--out-dir", demo_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim);
    if (fce_cmd->parsed()) return cmd_find_ce(fce);
    if (bnd_cmd->parsed()) return cmd_bounds(bnd);
    if (rep_cmd->parsed()) return cmd_repair(rep);
    if (val_cmd->parsed()) return cmd_validate(val);
    if (demo_cmd->parsed()) return cmd_demo_car(demo_dir);
  } catch (const tllrepair::InfeasibleBudget& e) {
    std::cerr << "infeasible (stage: budget): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
