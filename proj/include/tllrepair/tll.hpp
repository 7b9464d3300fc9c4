#pragma once

// Two-Level Lattice networks: lattice-semantics evaluation, lowering to an
// explicit ReLU layer stack, and identification of the active local linear
// function / selector group at a point.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace tllrepair {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One scalar-output TLL: N local linear functions (rows of W,b) and M
/// selector sets over them. The network value is
///   max_{j=1..M} min_{i in selectors[j]} (W x + b)_i.
struct ScalarTll {
  Matrix W;                                // N x n
  Vector b;                                // N
  std::vector<std::vector<int>> selectors; // M sets of 0-based row indices

  int n() const { return static_cast<int>(W.cols()); }
  int N() const { return static_cast<int>(W.rows()); }
  int M() const { return static_cast<int>(selectors.size()); }

  void validate() const {
    if (W.rows() == 0 || W.cols() == 0)
      throw std::invalid_argument("ScalarTll: empty linear layer");
    if (b.size() != W.rows())
      throw std::invalid_argument("ScalarTll: b has " + std::to_string(b.size()) +
                                  " entries, expected " + std::to_string(W.rows()));
    if (selectors.empty())
      throw std::invalid_argument("ScalarTll: no selector sets");
    for (const auto& s : selectors) {
      if (s.empty()) throw std::invalid_argument("ScalarTll: empty selector set");
      for (int i : s)
        if (i < 0 || i >= N())
          throw std::invalid_argument("ScalarTll: selector index out of range");
    }
  }
};

/// Multi-output TLL; all outputs share n, N, M (common architecture).
struct TllNetwork {
  std::vector<ScalarTll> outputs;

  int m() const { return static_cast<int>(outputs.size()); }
  int n() const { return outputs.at(0).n(); }
  int N() const { return outputs.at(0).N(); }
  int M() const { return outputs.at(0).M(); }

  void validate() const {
    if (outputs.empty()) throw std::invalid_argument("TllNetwork: no outputs");
    for (const auto& out : outputs) {
      out.validate();
      if (out.n() != n() || out.N() != N() || out.M() != M())
        throw std::invalid_argument("TllNetwork: outputs disagree on (n, N, M)");
    }
  }
};

struct ReluLayer {
  Matrix W;
  Vector b;
  bool relu; // false: linear layer
};

/// Explicit layer stack; evaluating it must agree with lattice semantics.
struct ReluLayerStack {
  std::vector<ReluLayer> layers;

  void validate() const {
    for (size_t k = 0; k < layers.size(); ++k) {
      if (layers[k].b.size() != layers[k].W.rows())
        throw std::invalid_argument("ReluLayerStack: bias/weight size mismatch");
      if (k > 0 && layers[k].W.cols() != layers[k - 1].W.rows())
        throw std::invalid_argument("ReluLayerStack: layers not composable");
    }
  }

  Vector eval(const Vector& x) const {
    Vector z = x;
    for (const auto& layer : layers) {
      z = layer.W * z + layer.b;
      if (layer.relu) z = z.cwiseMax(0.0);
    }
    return z;
  }
};

/// Active row (act) and achieving min-group (sel) per output, 0-based.
struct ActivationPattern {
  std::vector<int> act;
  std::vector<int> sel;
};

/// Shared arithmetic path for W x + b; both eval_lattice and active_indices
/// go through here so the identified row reproduces the output bit-exactly.
inline Vector row_values(const ScalarTll& out, const Vector& x) {
  if (x.size() != out.n())
    throw std::invalid_argument("row_values: input has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(out.n()));
  return out.W * x + out.b;
}

namespace detail {

// argmin over a selector set; ties broken toward the lowest index.
inline int group_argmin(const Vector& v, const std::vector<int>& sel) {
  int best = sel.front();
  for (int i : sel)
    if (v[i] < v[best]) best = i;
  return best;
}

} // namespace detail

inline double eval_lattice_scalar(const ScalarTll& out, const Vector& x) {
  const Vector v = row_values(out, x);
  double result = 0.0;
  bool first = true;
  for (const auto& sel : out.selectors) {
    const double group_min = v[detail::group_argmin(v, sel)];
    if (first || group_min > result) result = group_min;
    first = false;
  }
  return result;
}

inline Vector eval_lattice(const TllNetwork& net, const Vector& x) {
  Vector y(net.m());
  for (int k = 0; k < net.m(); ++k) y[k] = eval_lattice_scalar(net.outputs[k], x);
  return y;
}

/// mu_j = argmin over group j, act = argmax over {mu_j}; lowest index wins
/// ties in both stages.
inline ActivationPattern active_indices(const TllNetwork& net, const Vector& x) {
  ActivationPattern p;
  for (const auto& out : net.outputs) {
    const Vector v = row_values(out, x);
    int best_group = 0;
    int best_row = detail::group_argmin(v, out.selectors[0]);
    for (int j = 1; j < out.M(); ++j) {
      const int mu = detail::group_argmin(v, out.selectors[j]);
      if (v[mu] > v[best_row]) {
        best_row = mu;
        best_group = j;
      }
    }
    p.act.push_back(best_row);
    p.sel.push_back(best_group);
  }
  return p;
}

/// Pointwise activation conditions at x:
///  (i)  act_k is minimal within its selector group sel_k, and
///  (ii) every other group contains a row at or below act_k's value.
inline bool check_activation(const TllNetwork& net, const Vector& x,
                             const ActivationPattern& pattern) {
  if (static_cast<int>(pattern.act.size()) != net.m() ||
      static_cast<int>(pattern.sel.size()) != net.m())
    throw std::invalid_argument("check_activation: pattern arity mismatch");
  for (int k = 0; k < net.m(); ++k) {
    const ScalarTll& out = net.outputs[k];
    const int act = pattern.act[k];
    const int sel = pattern.sel[k];
    if (act < 0 || act >= out.N() || sel < 0 || sel >= out.M())
      throw std::invalid_argument("check_activation: pattern index out of range");
    const Vector v = row_values(out, x);
    for (int i : out.selectors[sel])
      if (!(v[act] <= v[i])) return false;
    for (int j = 0; j < out.M(); ++j) {
      if (j == sel) continue;
      bool dominated = false;
      for (int i : out.selectors[j])
        if (v[i] <= v[act]) {
          dominated = true;
          break;
        }
      if (!dominated) return false;
    }
  }
  return true;
}

namespace detail {

// One tree level reducing adjacent pairs with a two-input min/max gadget:
//   min(a,b) = b - relu(a-b),  max(a,b) = a + relu(b-a),
// odd elements pass through as relu(c) - relu(-c). Emits a ReLU layer
// followed by a linear recombination layer.
inline void reduce_level(std::vector<ReluLayer>& layers, std::vector<int>& sizes,
                         bool want_max) {
  int dim = 0;
  for (int s : sizes) dim += s;

  int relu_rows = 0;
  for (int s : sizes) relu_rows += 3 * (s / 2) + 2 * (s % 2);

  Matrix Wr = Matrix::Zero(relu_rows, dim);
  int out_rows = 0;
  for (int s : sizes) out_rows += (s + 1) / 2;
  Matrix Wl = Matrix::Zero(out_rows, relu_rows);

  int col = 0, rr = 0, lr = 0;
  for (int s : sizes) {
    int pos = 0;
    while (pos + 1 < s) {
      const int a = col + pos, b = col + pos + 1;
      if (want_max) {
        // relu(b-a), relu(a), relu(-a); combine as a + relu(b-a)
        Wr(rr, b) = 1.0;
        Wr(rr, a) = -1.0;
        Wr(rr + 1, a) = 1.0;
        Wr(rr + 2, a) = -1.0;
        Wl(lr, rr) = 1.0;
        Wl(lr, rr + 1) = 1.0;
        Wl(lr, rr + 2) = -1.0;
      } else {
        // relu(a-b), relu(a), relu(-a); combine as a - relu(a-b)
        Wr(rr, a) = 1.0;
        Wr(rr, b) = -1.0;
        Wr(rr + 1, a) = 1.0;
        Wr(rr + 2, a) = -1.0;
        Wl(lr, rr) = -1.0;
        Wl(lr, rr + 1) = 1.0;
        Wl(lr, rr + 2) = -1.0;
      }
      rr += 3;
      ++lr;
      pos += 2;
    }
    if (pos < s) { // passthrough
      const int c = col + pos;
      Wr(rr, c) = 1.0;
      Wr(rr + 1, c) = -1.0;
      Wl(lr, rr) = 1.0;
      Wl(lr, rr + 1) = -1.0;
      rr += 2;
      ++lr;
    }
    col += s;
  }

  layers.push_back({Wr, Vector::Zero(relu_rows), true});
  layers.push_back({Wl, Vector::Zero(out_rows), false});
  for (int& s : sizes) s = (s + 1) / 2;
}

} // namespace detail

/// Lower one TLL output to an explicit ReLU layer stack: a linear layer
/// gathering all selected rows, binary min trees per group, then a binary
/// max tree across group values.
inline ReluLayerStack lower_to_relu(const ScalarTll& out) {
  out.validate();
  ReluLayerStack stack;

  int total = 0;
  for (const auto& s : out.selectors) total += static_cast<int>(s.size());
  Matrix W0(total, out.n());
  Vector b0(total);
  std::vector<int> sizes;
  int r = 0;
  for (const auto& sel : out.selectors) {
    for (int i : sel) {
      W0.row(r) = out.W.row(i);
      b0[r] = out.b[i];
      ++r;
    }
    sizes.push_back(static_cast<int>(sel.size()));
  }
  stack.layers.push_back({W0, b0, false});

  auto any_gt1 = [](const std::vector<int>& v) {
    for (int s : v)
      if (s > 1) return true;
    return false;
  };
  while (any_gt1(sizes)) detail::reduce_level(stack.layers, sizes, /*want_max=*/false);

  std::vector<int> max_sizes{static_cast<int>(sizes.size())};
  while (max_sizes[0] > 1) detail::reduce_level(stack.layers, max_sizes, /*want_max=*/true);

  stack.validate();
  return stack;
}

} // namespace tllrepair
