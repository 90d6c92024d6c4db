#pragma once
// Dense layers, MLP forward/backward, and Adam. Model math runs in double
// so finite-difference checks have headroom; checkpoints store f32.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sidkit/rng.hpp"

namespace sidkit {

// Raised when training or inference produces non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DenseLayer {
  std::uint32_t in_dim = 0;
  std::uint32_t out_dim = 0;
  std::vector<double> weight;  // row major, out_dim x in_dim
  std::vector<double> bias;    // out_dim
};

inline DenseLayer make_dense(std::uint32_t in_dim, std::uint32_t out_dim) {
  DenseLayer l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.weight.assign(std::size_t{in_dim} * out_dim, 0.0);
  l.bias.assign(out_dim, 0.0);
  return l;
}

inline void glorot_init(DenseLayer& l, Rng& rng) {
  const double limit = std::sqrt(6.0 / (double(l.in_dim) + double(l.out_dim)));
  for (auto& w : l.weight) w = rng.uniform(-limit, limit);
  for (auto& b : l.bias) b = 0.0;
}

inline void dense_forward(const DenseLayer& l, const double* x, double* y) {
  for (std::uint32_t o = 0; o < l.out_dim; ++o) {
    const double* row = &l.weight[std::size_t{o} * l.in_dim];
    double acc = l.bias[o];
    for (std::uint32_t i = 0; i < l.in_dim; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// Layers with ReLU after each except the last, which stays linear.
struct Mlp {
  std::vector<DenseLayer> layers;

  std::uint32_t in_dim() const { return layers.front().in_dim; }
  std::uint32_t out_dim() const { return layers.back().out_dim; }
};

inline Mlp make_mlp(std::uint32_t input_dim, const std::vector<std::uint32_t>& layer_dims) {
  if (layer_dims.empty()) throw std::invalid_argument("mlp needs at least one layer");
  Mlp mlp;
  std::uint32_t in = input_dim;
  for (std::uint32_t out : layer_dims) {
    if (out == 0) throw std::invalid_argument("mlp layer width must be >= 1");
    mlp.layers.push_back(make_dense(in, out));
    in = out;
  }
  return mlp;
}

inline void mlp_init(Mlp& mlp, Rng& rng) {
  for (auto& l : mlp.layers) glorot_init(l, rng);
}

// Post-activation output of every layer; out.back() is the network output.
struct MlpActs {
  std::vector<std::vector<double>> out;
};

inline void mlp_forward(const Mlp& mlp, const double* x, MlpActs& acts) {
  acts.out.resize(mlp.layers.size());
  const double* cur = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const DenseLayer& l = mlp.layers[i];
    acts.out[i].resize(l.out_dim);
    dense_forward(l, cur, acts.out[i].data());
    if (i + 1 < mlp.layers.size()) {
      for (auto& v : acts.out[i]) v = v > 0.0 ? v : 0.0;
    }
    cur = acts.out[i].data();
  }
}

struct MlpGrads {
  std::vector<std::vector<double>> dweight;
  std::vector<std::vector<double>> dbias;

  void match(const Mlp& mlp) {
    dweight.resize(mlp.layers.size());
    dbias.resize(mlp.layers.size());
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      dweight[i].assign(mlp.layers[i].weight.size(), 0.0);
      dbias[i].assign(mlp.layers[i].bias.size(), 0.0);
    }
  }
};

// Accumulates parameter gradients for one example given dL/d(output).
// Writes dL/d(input) into d_in when non-null. `acts` must come from a
// forward pass of the same input.
inline void mlp_backward(const Mlp& mlp, const double* x, const MlpActs& acts,
                         std::vector<double> d_out, MlpGrads& grads, double* d_in = nullptr) {
  for (std::size_t i = mlp.layers.size(); i-- > 0;) {
    const DenseLayer& l = mlp.layers[i];
    const double* input = i == 0 ? x : acts.out[i - 1].data();
    double* dw = grads.dweight[i].data();
    double* db = grads.dbias[i].data();
    for (std::uint32_t o = 0; o < l.out_dim; ++o) {
      const double g = d_out[o];
      db[o] += g;
      double* row = &dw[std::size_t{o} * l.in_dim];
      for (std::uint32_t j = 0; j < l.in_dim; ++j) row[j] += g * input[j];
    }
    if (i == 0 && d_in == nullptr) break;
    std::vector<double> d_prev(l.in_dim, 0.0);
    for (std::uint32_t o = 0; o < l.out_dim; ++o) {
      const double g = d_out[o];
      const double* row = &l.weight[std::size_t{o} * l.in_dim];
      for (std::uint32_t j = 0; j < l.in_dim; ++j) d_prev[j] += g * row[j];
    }
    if (i == 0) {
      for (std::uint32_t j = 0; j < l.in_dim; ++j) d_in[j] = d_prev[j];
      break;
    }
    // ReLU mask: the stored activation is already rectified.
    const std::vector<double>& a = acts.out[i - 1];
    for (std::uint32_t j = 0; j < l.in_dim; ++j) {
      d_prev[j] = a[j] > 0.0 ? d_prev[j] : 0.0;
    }
    d_out = std::move(d_prev);
  }
}

// ---- Adam --------------------------------------------------------------

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;

  void ensure(std::size_t n) {
    if (m.size() != n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
  }
};

// One Adam update over a contiguous span. `t` is the 1-based global step
// used for bias correction; for lazily updated embedding rows it advances
// even on steps that do not touch the row.
inline void adam_update(double* param, const double* grad, double* m, double* v,
                        std::size_t n, const AdamParams& hp, std::int64_t t) {
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grad[i];
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    param[i] -= hp.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hp.eps);
  }
}

inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        AdamState& st, const AdamParams& hp, std::int64_t t) {
  st.ensure(param.size());
  adam_update(param.data(), grad.data(), st.m.data(), st.v.data(), param.size(), hp, t);
}

struct MlpAdam {
  std::vector<AdamState> weight, bias;

  void match(const Mlp& mlp) {
    weight.resize(mlp.layers.size());
    bias.resize(mlp.layers.size());
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      weight[i].ensure(mlp.layers[i].weight.size());
      bias[i].ensure(mlp.layers[i].bias.size());
    }
  }
};

inline void mlp_adam_update(Mlp& mlp, const MlpGrads& grads, MlpAdam& st, const AdamParams& hp,
                            std::int64_t t) {
  st.match(mlp);
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    adam_update(mlp.layers[i].weight, grads.dweight[i], st.weight[i], hp, t);
    adam_update(mlp.layers[i].bias, grads.dbias[i], st.bias[i], hp, t);
  }
}

inline bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace sidkit
