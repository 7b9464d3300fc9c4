#pragma once

// A small second-order-cone programming layer: an append-only program
// builder (vector variables, affine equalities/inequalities, norm cones,
// sum-of-norms and linear objectives) and an operator-splitting solver on
// the homogeneous self-dual embedding.
//
// Canonical form handed to the solver:
//   min c'x  s.t.  Ax + s = b,  s in K = {0}^p x R+^q x SOC x ... x SOC.
// Sum-of-norms objective terms become epigraph scalars with one SOC each.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace tllrepair::socp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Affine map z -> sum_k coeff_k * z_{var_k} + constant.
struct Affine {
  int rows_ = 0;
  Vector constant;
  std::vector<std::pair<int, Matrix>> terms;

  explicit Affine(int rows) : rows_(rows), constant(Vector::Zero(rows)) {}

  static Affine constant_of(const Vector& v) {
    Affine a(static_cast<int>(v.size()));
    a.constant = v;
    return a;
  }

  int rows() const { return rows_; }

  Affine& set_constant(const Vector& v) {
    if (v.size() != rows_) throw std::invalid_argument("Affine: constant size mismatch");
    constant = v;
    return *this;
  }

  Affine& set_constant(double v) {
    if (rows_ != 1) throw std::invalid_argument("Affine: scalar constant on vector map");
    constant[0] = v;
    return *this;
  }

  Affine& add(int var, const Matrix& coeff) {
    if (coeff.rows() != rows_) throw std::invalid_argument("Affine: coefficient row mismatch");
    terms.emplace_back(var, coeff);
    return *this;
  }

  /// Scalar-row convenience: coefficient given as a row vector.
  Affine& add_row(int var, const Vector& coeff) {
    if (rows_ != 1) throw std::invalid_argument("Affine: add_row needs a scalar map");
    terms.emplace_back(var, coeff.transpose());
    return *this;
  }

  Vector eval(const std::vector<Vector>& values) const {
    Vector out = constant;
    for (const auto& [var, coeff] : terms) out += coeff * values.at(var);
    return out;
  }
};

struct Solution {
  enum class Status { optimal, infeasible, unbounded, max_iter };

  Status status = Status::max_iter;
  std::vector<Vector> values;
  double objective = std::numeric_limits<double>::quiet_NaN();
  struct Residuals {
    double primal_feas = std::numeric_limits<double>::quiet_NaN();
    double cone_feas = std::numeric_limits<double>::quiet_NaN();
    double stationarity = std::numeric_limits<double>::quiet_NaN();
  } residuals;
  int iterations = 0;

  const Vector& value(int var) const { return values.at(var); }
};

inline const char* status_name(Solution::Status s) {
  switch (s) {
    case Solution::Status::optimal: return "optimal";
    case Solution::Status::infeasible: return "infeasible";
    case Solution::Status::unbounded: return "unbounded";
    default: return "max_iter";
  }
}

class ConvexProgram {
 public:
  int add_variable(const std::string& name, int dim) {
    if (dim < 1) throw std::invalid_argument("add_variable: dim must be >= 1");
    var_names_.push_back(name);
    var_dims_.push_back(dim);
    return static_cast<int>(var_dims_.size()) - 1;
  }

  void add_eq(const Affine& expr) {
    validate(expr);
    eqs_.push_back(expr);
  }

  void add_ineq(const Affine& expr) {
    validate(expr);
    if (expr.rows() != 1) throw std::invalid_argument("add_ineq: scalar map required");
    ineqs_.push_back(expr);
  }

  void add_cone(const Affine& vec, const Affine& rhs) {
    validate(vec);
    validate(rhs);
    if (rhs.rows() != 1) throw std::invalid_argument("add_cone: rhs must be scalar");
    cones_.emplace_back(vec, rhs);
  }

  void add_norm_objective(const Affine& vec) {
    validate(vec);
    norm_terms_.push_back(vec);
  }

  void add_linear_objective(const Affine& expr) {
    validate(expr);
    if (expr.rows() != 1) throw std::invalid_argument("add_linear_objective: scalar map required");
    linear_terms_.push_back(expr);
  }

  int num_variables() const { return static_cast<int>(var_dims_.size()); }
  int variable_dim(int var) const { return var_dims_.at(var); }
  const std::string& variable_name(int var) const { return var_names_.at(var); }

  double objective_value(const std::vector<Vector>& values) const {
    double obj = 0.0;
    for (const auto& t : norm_terms_) obj += t.eval(values).norm();
    for (const auto& t : linear_terms_) obj += t.eval(values)[0];
    return obj;
  }

  /// Largest constraint violation at a candidate point (for tests/reports).
  double max_violation(const std::vector<Vector>& values) const {
    double worst = 0.0;
    for (const auto& e : eqs_)
      worst = std::max(worst, e.eval(values).cwiseAbs().maxCoeff());
    for (const auto& e : ineqs_) worst = std::max(worst, e.eval(values)[0]);
    for (const auto& [vec, rhs] : cones_)
      worst = std::max(worst, vec.eval(values).norm() - rhs.eval(values)[0]);
    return worst;
  }

  nlohmann::json to_json() const;

  friend Solution solve(const ConvexProgram& prog, double tol, int max_iter);

 private:
  void validate(const Affine& a) const {
    for (const auto& [var, coeff] : a.terms) {
      if (var < 0 || var >= num_variables())
        throw std::invalid_argument("ConvexProgram: unknown variable in affine map");
      if (coeff.cols() != var_dims_[var])
        throw std::invalid_argument("ConvexProgram: coefficient width mismatch for variable '" +
                                    var_names_[var] + "'");
    }
  }

  struct Canonical {
    Matrix A;
    Vector b, c;
    double offset = 0.0;
    int zero = 0, nonneg = 0;
    std::vector<int> socs;
    int total_vars = 0;
    std::vector<int> offsets; // user variable offsets into x
  };

  Canonical canonicalize() const {
    Canonical cf;
    cf.offsets.resize(var_dims_.size());
    int nx = 0;
    for (size_t i = 0; i < var_dims_.size(); ++i) {
      cf.offsets[i] = nx;
      nx += var_dims_[i];
    }
    const int n_epi = static_cast<int>(norm_terms_.size());
    cf.total_vars = nx + n_epi;

    int rows = 0;
    for (const auto& e : eqs_) rows += e.rows();
    cf.zero = rows;
    rows += static_cast<int>(ineqs_.size());
    cf.nonneg = static_cast<int>(ineqs_.size());
    for (const auto& [vec, rhs] : cones_) {
      cf.socs.push_back(vec.rows() + 1);
      rows += vec.rows() + 1;
    }
    for (const auto& t : norm_terms_) {
      cf.socs.push_back(t.rows() + 1);
      rows += t.rows() + 1;
    }

    cf.A = Matrix::Zero(rows, cf.total_vars);
    cf.b = Vector::Zero(rows);
    cf.c = Vector::Zero(cf.total_vars);

    auto scatter = [&](const Affine& a, int row, double sign) {
      for (const auto& [var, coeff] : a.terms)
        cf.A.block(row, cf.offsets[var], a.rows(), coeff.cols()) += sign * coeff;
    };

    int row = 0;
    // zero cone: A x = b  <=>  expr = 0
    for (const auto& e : eqs_) {
      scatter(e, row, +1.0);
      cf.b.segment(row, e.rows()) = -e.constant;
      row += e.rows();
    }
    // nonneg: s = b - A x >= 0  <=>  expr <= 0
    for (const auto& e : ineqs_) {
      scatter(e, row, +1.0);
      cf.b[row] = -e.constant[0];
      row += 1;
    }
    // SOC: s = (rhs(x); vec(x)), i.e. A rows are negated maps
    for (const auto& [vec, rhs] : cones_) {
      scatter(rhs, row, -1.0);
      cf.b[row] = rhs.constant[0];
      scatter(vec, row + 1, -1.0);
      cf.b.segment(row + 1, vec.rows()) = vec.constant;
      row += vec.rows() + 1;
    }
    // epigraph SOC per norm term: s = (t_k; term(x))
    for (size_t k = 0; k < norm_terms_.size(); ++k) {
      const Affine& t = norm_terms_[k];
      cf.A(row, nx + static_cast<int>(k)) = -1.0;
      scatter(t, row + 1, -1.0);
      cf.b.segment(row + 1, t.rows()) = t.constant;
      cf.c[nx + static_cast<int>(k)] = 1.0;
      row += t.rows() + 1;
    }
    for (const auto& e : linear_terms_) {
      for (const auto& [var, coeff] : e.terms)
        cf.c.segment(cf.offsets[var], coeff.cols()) += coeff.row(0).transpose();
      cf.offset += e.constant[0];
    }
    return cf;
  }

  std::vector<std::string> var_names_;
  std::vector<int> var_dims_;
  std::vector<Affine> eqs_;
  std::vector<Affine> ineqs_;
  std::vector<std::pair<Affine, Affine>> cones_;
  std::vector<Affine> norm_terms_;
  std::vector<Affine> linear_terms_;
};

namespace detail {

inline void project_soc(Eigen::Ref<Vector> block) {
  const int d = static_cast<int>(block.size());
  const double t = block[0];
  const double z = d > 1 ? block.tail(d - 1).norm() : 0.0;
  if (z <= t) return;
  if (z <= -t) {
    block.setZero();
    return;
  }
  const double a = 0.5 * (t + z);
  block[0] = a;
  if (z > 0.0) block.tail(d - 1) *= a / z;
}

// Projection onto K (zero x nonneg x SOCs).
inline void project_cone(Eigen::Ref<Vector> s, int zero, int nonneg,
                         const std::vector<int>& socs) {
  s.head(zero).setZero();
  s.segment(zero, nonneg) = s.segment(zero, nonneg).cwiseMax(0.0);
  int at = zero + nonneg;
  for (int d : socs) {
    project_soc(s.segment(at, d));
    at += d;
  }
}

// Projection onto K* (free x nonneg x SOCs).
inline void project_dual_cone(Eigen::Ref<Vector> y, int zero, int nonneg,
                              const std::vector<int>& socs) {
  y.segment(zero, nonneg) = y.segment(zero, nonneg).cwiseMax(0.0);
  int at = zero + nonneg;
  for (int d : socs) {
    project_soc(y.segment(at, d));
    at += d;
  }
}

inline double cone_distance(const Vector& s, int zero, int nonneg,
                            const std::vector<int>& socs) {
  Vector p = s;
  project_cone(p, zero, nonneg, socs);
  return (p - s).norm();
}

} // namespace detail

/// Operator-splitting solve on the homogeneous self-dual embedding. Status
/// optimal is declared only when the relative primal/dual residuals and gap
/// of the unscaled candidate are all below tol; infeasibility is declared
/// from an approximate Farkas certificate.
inline Solution solve(const ConvexProgram& prog, double tol = 1e-8, int max_iter = 100000) {
  if (tol <= 0.0) throw std::invalid_argument("solve: tol must be positive");
  const auto cf = prog.canonicalize();
  const int n = cf.total_vars;
  const int m = static_cast<int>(cf.b.size());

  Solution sol;
  auto unpack = [&](const Vector& x) {
    sol.values.clear();
    for (int v = 0; v < prog.num_variables(); ++v)
      sol.values.push_back(x.segment(cf.offsets[v], prog.variable_dim(v)));
  };

  if (n == 0 && m == 0) {
    sol.status = Solution::Status::optimal;
    sol.objective = cf.offset;
    sol.residuals = {0.0, 0.0, 0.0};
    return sol;
  }
  if (m == 0) {
    // unconstrained linear objective over free variables
    if (cf.c.norm() == 0.0) {
      unpack(Vector::Zero(n));
      sol.status = Solution::Status::optimal;
      sol.objective = prog.objective_value(sol.values) + cf.offset;
      sol.residuals = {0.0, 0.0, 0.0};
      return sol;
    }
    sol.status = Solution::Status::unbounded;
    return sol;
  }

  // ADMM on the embedding: u = (x, y, tau), v = (r, s, kappa).
  const int N = n + m + 1;
  Matrix IQ = Matrix::Identity(N, N);
  IQ.block(0, n, n, m) += cf.A.transpose();
  IQ.block(0, n + m, n, 1) += cf.c;
  IQ.block(n, 0, m, n) -= cf.A;
  IQ.block(n, n + m, m, 1) += cf.b;
  IQ.block(n + m, 0, 1, n) -= cf.c.transpose();
  IQ.block(n + m, n, 1, m) -= cf.b.transpose();
  const Eigen::PartialPivLU<Matrix> lu(IQ);

  Vector u = Vector::Zero(N), v = Vector::Zero(N);
  u[N - 1] = 1.0;
  v[N - 1] = 1.0;

  const double alpha = 1.5;
  const double bnorm = cf.b.norm();
  const double cnorm = cf.c.norm();

  auto extract_candidate = [&](Vector& x, Vector& y, Vector& s, double& tau) {
    x = u.head(n);
    y = u.segment(n, m);
    s = v.segment(n, m);
    tau = u[N - 1];
  };

  auto finish = [&](Solution::Status status, const Vector& x, const Vector& y,
                    const Vector& s, double tau, int iters) {
    sol.status = status;
    sol.iterations = iters;
    if (tau > 1e-12) {
      const Vector xh = x / tau;
      const Vector yh = y / tau;
      const Vector sh = s / tau;
      unpack(xh);
      sol.objective = prog.objective_value(sol.values) + cf.offset;
      const Vector slack = cf.b - cf.A * xh;
      sol.residuals.primal_feas = (cf.A * xh + sh - cf.b).norm() / (1.0 + bnorm);
      sol.residuals.cone_feas = detail::cone_distance(slack, cf.zero, cf.nonneg, cf.socs);
      const double dres = (cf.A.transpose() * yh + cf.c).norm() / (1.0 + cnorm);
      const double cx = cf.c.dot(xh), by = cf.b.dot(yh);
      const double gap = std::abs(cx + by) / (1.0 + std::abs(cx) + std::abs(by));
      sol.residuals.stationarity = std::max(dres, gap);
    }
    return sol;
  };

  Vector x, y, s;
  double tau = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Vector ut = lu.solve(u + v);
    const Vector ur = alpha * ut + (1.0 - alpha) * u;
    Vector w = ur - v;
    // project onto R^n x K* x R+
    detail::project_dual_cone(w.segment(n, m), cf.zero, cf.nonneg, cf.socs);
    w[N - 1] = std::max(w[N - 1], 0.0);
    v += w - ur;
    u = w;

    if (it % 20 != 0 && it != max_iter) continue;

    extract_candidate(x, y, s, tau);
    if (tau > 1e-12) {
      const Vector xh = x / tau;
      const Vector yh = y / tau;
      const Vector sh = s / tau;
      const double pres = (cf.A * xh + sh - cf.b).norm() / (1.0 + bnorm);
      const double dres = (cf.A.transpose() * yh + cf.c).norm() / (1.0 + cnorm);
      const double cx = cf.c.dot(xh), by = cf.b.dot(yh);
      const double gap = std::abs(cx + by) / (1.0 + std::abs(cx) + std::abs(by));
      if (pres <= tol && dres <= tol && gap <= tol)
        return finish(Solution::Status::optimal, x, y, s, tau, it);
    }
    const double by = cf.b.dot(y);
    if (by < -1e-12) {
      const Vector yc = y / (-by);
      if ((cf.A.transpose() * yc).norm() <= tol)
        return finish(Solution::Status::infeasible, x, y, s, tau, it);
    }
    const double cx = cf.c.dot(x);
    if (cx < -1e-12) {
      const Vector xc = x / (-cx);
      const Vector sc = s / (-cx);
      if ((cf.A * xc + sc).norm() <= tol)
        return finish(Solution::Status::unbounded, x, y, s, tau, it);
    }
  }

  extract_candidate(x, y, s, tau);
  return finish(Solution::Status::max_iter, x, y, s, tau, max_iter);
}

inline nlohmann::json ConvexProgram::to_json() const {
  const Canonical cf = canonicalize();
  nlohmann::json j;
  j["variables"] = nlohmann::json::array();
  for (int v = 0; v < num_variables(); ++v)
    j["variables"].push_back({{"name", var_names_[v]}, {"dim", var_dims_[v]}});
  auto mat = [](const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < M.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  j["A"] = mat(cf.A);
  j["b"] = std::vector<double>(cf.b.data(), cf.b.data() + cf.b.size());
  j["c"] = std::vector<double>(cf.c.data(), cf.c.data() + cf.c.size());
  j["objective_offset"] = cf.offset;
  j["cones"] = {{"zero", cf.zero}, {"nonneg", cf.nonneg}, {"soc", cf.socs}};
  return j;
}

} // namespace tllrepair::socp
