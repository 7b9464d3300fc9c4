#pragma once

// File formats: TLL network JSON (1-based selector indices on disk),
// dynamics and safety-spec configs, trajectory CSV, and report JSON.

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tllrepair/bounds.hpp"
#include "tllrepair/dynamics.hpp"
#include "tllrepair/repair.hpp"
#include "tllrepair/tll.hpp"

namespace tllrepair::io {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("failed to parse " + path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a non-empty matrix");
  const size_t cols = j.at(0).size();
  Matrix M(j.size(), cols);
  for (size_t r = 0; r < j.size(); ++r) {
    if (j.at(r).size() != cols) throw std::invalid_argument("ragged matrix rows");
    for (size_t c = 0; c < cols; ++c) M(r, c) = j.at(r).at(c).get<double>();
  }
  return M;
}

inline Vector vector_from_json(const json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

inline json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

// ---- TLL network ----------------------------------------------------------

inline TllNetwork tll_from_json(const json& j) {
  TllNetwork net;
  for (const auto& out_j : j.at("outputs")) {
    ScalarTll out;
    out.W = matrix_from_json(out_j.at("W"));
    out.b = vector_from_json(out_j.at("b"));
    for (const auto& sel_j : out_j.at("selectors")) {
      std::vector<int> sel;
      for (const auto& idx : sel_j) sel.push_back(idx.get<int>() - 1); // 1-based on disk
      out.selectors.push_back(sel);
    }
    net.outputs.push_back(std::move(out));
  }
  net.validate();
  if (j.contains("n") && j.at("n").get<int>() != net.n())
    throw std::invalid_argument("TLL json: declared n disagrees with W");
  if (j.contains("m") && j.at("m").get<int>() != net.m())
    throw std::invalid_argument("TLL json: declared m disagrees with outputs");
  if (j.contains("N") && j.at("N").get<int>() != net.N())
    throw std::invalid_argument("TLL json: declared N disagrees with W");
  if (j.contains("M") && j.at("M").get<int>() != net.M())
    throw std::invalid_argument("TLL json: declared M disagrees with selectors");
  return net;
}

inline json tll_to_json(const TllNetwork& net) {
  json j;
  j["n"] = net.n();
  j["m"] = net.m();
  j["N"] = net.N();
  j["M"] = net.M();
  j["outputs"] = json::array();
  for (const auto& out : net.outputs) {
    json oj;
    oj["W"] = matrix_to_json(out.W);
    oj["b"] = vector_to_json(out.b);
    json sels = json::array();
    for (const auto& sel : out.selectors) {
      json sj = json::array();
      for (int i : sel) sj.push_back(i + 1);
      sels.push_back(sj);
    }
    oj["selectors"] = sels;
    j["outputs"].push_back(oj);
  }
  return j;
}

inline TllNetwork load_tll(const std::string& path) { return tll_from_json(load_json_file(path)); }
inline void save_tll(const std::string& path, const TllNetwork& net) {
  save_json_file(path, tll_to_json(net));
}

// ---- dynamics config ------------------------------------------------------

// { "model": "car", "V": .., "ts": .., "Lf": optional, "Lg": optional }
// { "model": "linear", "A": [[..]], "c": [..], "G": [[..]] }
inline DynamicsModel dynamics_from_json(const json& j) {
  const std::string kind = j.at("model").get<std::string>();
  DynamicsModel model;
  if (kind == "car") {
    model = car_model(j.at("V").get<double>(), j.at("ts").get<double>());
  } else if (kind == "linear") {
    model = linear_model(matrix_from_json(j.at("A")), vector_from_json(j.at("c")),
                         matrix_from_json(j.at("G")));
  } else {
    throw std::invalid_argument("dynamics config: unknown model '" + kind + "'");
  }
  if (j.contains("Lf")) {
    model.L_f = j.at("Lf").get<double>();
    model.lipschitz_source = LipschitzSource::user;
  }
  if (j.contains("Lg")) {
    model.L_g = j.at("Lg").get<double>();
    model.lipschitz_source = LipschitzSource::user;
  }
  return model;
}

inline DynamicsModel load_dynamics(const std::string& path) {
  return dynamics_from_json(load_json_file(path));
}

// ---- safety spec ----------------------------------------------------------

inline Box box_from_json(const json& j) {
  Box box{vector_from_json(j.at("lower")), vector_from_json(j.at("upper"))};
  box.validate();
  return box;
}

inline json box_to_json(const Box& box) {
  return json{{"lower", vector_to_json(box.lower)}, {"upper", vector_to_json(box.upper)}};
}

inline SafetySpec safety_from_json(const json& j) {
  SafetySpec spec;
  spec.X_ws = box_from_json(j.at("X_ws"));
  spec.X_safe = box_from_json(j.at("X_safe"));
  spec.X_unsafe.G = matrix_from_json(j.at("X_unsafe").at("G"));
  spec.X_unsafe.h = vector_from_json(j.at("X_unsafe").at("h"));
  spec.T = j.at("T").get<int>();
  spec.validate();
  return spec;
}

inline json safety_to_json(const SafetySpec& spec) {
  json j;
  j["X_ws"] = box_to_json(spec.X_ws);
  j["X_safe"] = box_to_json(spec.X_safe);
  j["X_unsafe"] = {{"G", matrix_to_json(spec.X_unsafe.G)}, {"h", vector_to_json(spec.X_unsafe.h)}};
  j["T"] = spec.T;
  return j;
}

inline SafetySpec load_safety(const std::string& path) {
  return safety_from_json(load_json_file(path));
}

// ---- trajectory CSV -------------------------------------------------------

// header: step,x1,...,xn,u1,...,um ; inputs are empty on the final row.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  if (traj.states.empty()) throw std::invalid_argument("write_trajectory_csv: empty trajectory");
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const int n = static_cast<int>(traj.states.front().size());
  const int m = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs.front().size());
  out << "step";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= m; ++i) out << ",u" << i;
  out << "\n";
  for (size_t k = 0; k < traj.states.size(); ++k) {
    out << k;
    for (int i = 0; i < n; ++i) out << "," << traj.states[k][i];
    for (int i = 0; i < m; ++i) {
      out << ",";
      if (k < traj.inputs.size()) out << traj.inputs[k][i];
    }
    out << "\n";
  }
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("empty trajectory csv");
  int n = 0, m = 0;
  {
    std::stringstream ss(header);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind('x', 0) == 0) ++n;
      if (col.rfind('u', 0) == 0) ++m;
    }
  }
  if (n == 0) throw std::invalid_argument("trajectory csv: no state columns");
  Trajectory traj;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ','); // step index
    Vector x(n);
    for (int i = 0; i < n; ++i) {
      std::getline(ss, cell, ',');
      x[i] = std::stod(cell);
    }
    traj.states.push_back(x);
    Vector u(m);
    bool has_input = m > 0;
    for (int i = 0; i < m; ++i) {
      if (!std::getline(ss, cell, ',') || cell.empty()) {
        has_input = false;
        break;
      }
      u[i] = std::stod(cell);
    }
    if (has_input) traj.inputs.push_back(u);
  }
  return traj;
}

// ---- reports --------------------------------------------------------------

inline json certificate_to_json(const BoundCertificate& cert) {
  return json{{"beta_max", cert.beta_max},
              {"L_max", cert.L_max},
              {"d_safe", cert.d_safe},
              {"reach_radius", cert.reach_radius},
              {"original_net_ok", cert.original_net_ok}};
}

inline json pattern_to_json(const ActivationPattern& p) {
  json act = json::array(), sel = json::array();
  for (int a : p.act) act.push_back(a + 1);
  for (int s : p.sel) sel.push_back(s + 1);
  return json{{"act", act}, {"sel", sel}};
}

inline json repair_report_to_json(const RepairResult& result, const std::string& before_csv,
                                  const std::string& after_csv,
                                  const std::string& repaired_net_path) {
  json j;
  j["status"] = status_name(result.status);
  j["stage_message"] = result.stage_message;
  j["activation_pattern"] = pattern_to_json(result.pattern);
  j["certificate"] = certificate_to_json(result.certificates);
  j["beta_fn"] = {{"c0", result.beta_fn.c0}, {"c_w", result.beta_fn.c_w}, {"c_b", result.beta_fn.c_b}};
  j["L_fn"] = {{"c0", result.L_fn.c0}, {"c_w", result.L_fn.c_w}, {"c_b", result.L_fn.c_b}};
  j["omega"] = {{"W", result.omega.W}, {"b", result.omega.b}};
  if (result.local) {
    j["local"] = {{"halfspace", result.local->halfspace + 1},
                  {"objective", result.local->objective},
                  {"constraint_slack", result.local->constraint_slack},
                  {"row_status", result.local->row_status},
                  {"repaired_rows", matrix_to_json(result.local->W_rows)},
                  {"repaired_biases", vector_to_json(result.local->b_vals)}};
    j["global_objective"] = result.global_objective;
  }
  if (!before_csv.empty()) j["before_csv"] = before_csv;
  if (!after_csv.empty()) j["after_csv"] = after_csv;
  if (!repaired_net_path.empty()) j["repaired_network"] = repaired_net_path;
  return j;
}

inline json validation_report_to_json(const ValidationReport& report) {
  return json{{"arch_ok", report.arch_ok},
              {"selectors_ok", report.selectors_ok},
              {"ce_one_step_safe", report.ce_one_step_safe},
              {"ce_horizon_safe", report.ce_horizon_safe},
              {"safe_samples_ok", report.safe_samples_ok},
              {"reach_bound_ok", report.reach_bound_ok},
              {"reach_radius_repaired", report.reach_radius_repaired},
              {"local_change", report.local_change},
              {"global_change", report.global_change},
              {"all_pass", report.all_pass()}};
}

} // namespace tllrepair::io
