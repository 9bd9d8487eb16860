// Copyright 2026 The sgd-unlearn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/error.hpp"
#include "unlearn/param_vector.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

/// Dense row-major matrix, just enough for batches and logits.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    Require(data.size() == r * c, ErrorKind::kShape, "matrix data does not match its shape");
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

enum class Activation { kRelu, kTanh, kIdentity };

inline std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline Activation ParseActivation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  Fail(ErrorKind::kArgument, "unknown activation '" + std::string(name) + "'");
}

/// Feed-forward architecture. layer_sizes = {input, hidden..., output};
/// activations has one entry per hidden layer. Outputs are raw logits.
struct ModelSpec {
  std::vector<std::size_t> layer_sizes;
  std::vector<Activation> activations;

  static ModelSpec Mlp(std::vector<std::size_t> sizes, Activation hidden) {
    ModelSpec spec;
    spec.layer_sizes = std::move(sizes);
    if (spec.layer_sizes.size() > 2) {
      spec.activations.assign(spec.layer_sizes.size() - 2, hidden);
    }
    spec.Validate();
    return spec;
  }

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  std::size_t ParamCount() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      n += layer_sizes[l + 1] * layer_sizes[l] + layer_sizes[l + 1];
    }
    return n;
  }

  void Validate() const {
    Require(layer_sizes.size() >= 2, ErrorKind::kArgument,
            "model needs at least an input and an output layer");
    for (std::size_t s : layer_sizes) {
      Require(s > 0, ErrorKind::kArgument, "layer sizes must be positive");
    }
    Require(output_dim() >= 2, ErrorKind::kArgument, "output dimension must be at least 2");
    Require(activations.size() == layer_sizes.size() - 2, ErrorKind::kArgument,
            "need exactly one activation per hidden layer");
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct Model {
  ModelSpec spec;
  ParamVector weights;
};

/// Rows of inputs with one integer class label per row.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.rows; }
};

enum class LossKind { kCe, kSd, kL2, kHce };

inline std::string_view LossKindName(LossKind k) {
  switch (k) {
    case LossKind::kCe: return "ce";
    case LossKind::kSd: return "sd";
    case LossKind::kL2: return "l2";
    case LossKind::kHce: return "hce";
  }
  return "?";
}

inline LossKind ParseLossKind(std::string_view name) {
  if (name == "ce") return LossKind::kCe;
  if (name == "sd") return LossKind::kSd;
  if (name == "l2") return LossKind::kL2;
  if (name == "hce") return LossKind::kHce;
  Fail(ErrorKind::kArgument, "unknown loss kind '" + std::string(name) + "'");
}

/// Cross-entropy plus at most one penalty. gamma scales the per-example
/// logit standard deviation (kSd); lambda scales ||w||_2 (kL2) or
/// ||p*(1-p)||_2 (kHce). Strengths that do not belong to `kind` are ignored.
struct LossSpec {
  LossKind kind = LossKind::kCe;
  double gamma = 0.0;
  double lambda = 0.0;

  double sd_strength() const { return kind == LossKind::kSd ? gamma : 0.0; }
  double l2_strength() const { return kind == LossKind::kL2 ? lambda : 0.0; }
  double hce_strength() const { return kind == LossKind::kHce ? lambda : 0.0; }

  void Validate() const {
    Require(std::isfinite(gamma) && gamma >= 0.0, ErrorKind::kArgument, "gamma must be >= 0");
    Require(std::isfinite(lambda) && lambda >= 0.0, ErrorKind::kArgument, "lambda must be >= 0");
  }
};

/// Anything with a scalar loss and an exact gradient over a ParamVector.
/// The network objective below is the main one; closed-form objectives are
/// used for oracles and for the small bound scenarios.
template <class O>
concept Objective = requires(const O& obj, const ParamVector& w,
                             const typename O::batch_type& batch) {
  { obj.Loss(w, batch) } -> std::convertible_to<double>;
  { obj.Gradient(w, batch) } -> std::same_as<ParamVector>;
};

template <Objective O>
using BatchOf = typename O::batch_type;

namespace detail {

inline double Activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

// Derivative expressed through the pre-activation x and output y.
inline double ActivateDerivative(Activation a, double x, double y) {
  switch (a) {
    case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: return 1.0 - y * y;
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

inline void CheckBatch(const ModelSpec& spec, const Batch& batch, bool need_labels) {
  Require(batch.inputs.cols == spec.input_dim(), ErrorKind::kShape,
          "input width " + std::to_string(batch.inputs.cols) + " does not match model input " +
              std::to_string(spec.input_dim()));
  Require(batch.inputs.rows >= 1, ErrorKind::kShape, "empty batch");
  if (!need_labels) return;
  Require(batch.labels.size() == batch.inputs.rows, ErrorKind::kShape,
          "label count does not match batch rows");
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= spec.output_dim()) {
      Fail(ErrorKind::kLabel, "label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(spec.output_dim()) + ")");
    }
  }
}

// Per-layer pre-activations and outputs for one batch. outputs[0] is the
// input; outputs.back() are the logits.
struct ForwardTrace {
  std::vector<Matrix> pre;
  std::vector<Matrix> outputs;
};

inline ForwardTrace RunForward(const ModelSpec& spec, std::span<const double> w,
                               const Matrix& x) {
  ForwardTrace trace;
  trace.outputs.push_back(x);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double* weight = w.data() + offset;
    const double* bias = weight + out * in;
    offset += out * in + out;
    const Matrix& a = trace.outputs.back();
    Matrix z(a.rows, out);
    for (std::size_t r = 0; r < a.rows; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        double sum = bias[o];
        const double* wrow = weight + o * in;
        for (std::size_t i = 0; i < in; ++i) sum += wrow[i] * a(r, i);
        z(r, o) = sum;
      }
    }
    Matrix y = z;
    if (l + 1 < spec.num_layers()) {
      const Activation act = spec.activations[l];
      for (double& v : y.data) v = Activate(act, v);
    }
    trace.pre.push_back(std::move(z));
    trace.outputs.push_back(std::move(y));
  }
  return trace;
}

// Loss of one example and its derivative with respect to the logits.
inline double ExampleLoss(std::span<const double> z, int label, const LossSpec& spec,
                          std::span<double> dz) {
  const std::size_t c = z.size();
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double lse = zmax + std::log(sum);
  double loss = lse - z[label];

  std::vector<double> p(c);
  for (std::size_t k = 0; k < c; ++k) p[k] = std::exp(z[k] - lse);
  for (std::size_t k = 0; k < c; ++k) dz[k] = p[k] - (static_cast<int>(k) == label ? 1.0 : 0.0);

  if (const double gamma = spec.sd_strength(); gamma > 0.0) {
    double mu = 0.0;
    for (double v : z) mu += v;
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (double v : z) var += (v - mu) * (v - mu);
    var /= static_cast<double>(c);
    const double sd = std::sqrt(var);
    loss += gamma * sd;
    // The mean's contribution cancels because sum_k (z_k - mu) = 0.
    if (sd > 0.0) {
      for (std::size_t k = 0; k < c; ++k) {
        dz[k] += gamma * (z[k] - mu) / (static_cast<double>(c) * sd);
      }
    }
  }

  if (const double lambda = spec.hce_strength(); lambda > 0.0) {
    std::vector<double> q(c);
    double qq = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      q[k] = p[k] * (1.0 - p[k]);
      qq += q[k] * q[k];
    }
    const double r = std::sqrt(qq);
    loss += lambda * r;
    if (r > 0.0) {
      // d r / d p_k, then through the softmax Jacobian p_k (delta_kj - p_j).
      std::vector<double> g(c);
      double gp = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        g[k] = q[k] * (1.0 - 2.0 * p[k]) / r;
        gp += g[k] * p[k];
      }
      for (std::size_t k = 0; k < c; ++k) dz[k] += lambda * p[k] * (g[k] - gp);
    }
  }
  return loss;
}

}  // namespace detail

/// Initial weights: uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out)),
/// biases zero.
inline Model InitModel(const ModelSpec& spec, std::uint64_t seed) {
  spec.Validate();
  Rng rng(seed);
  ParamVector w(spec.ParamCount());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    for (std::size_t i = 0; i < out * in; ++i) w[offset + i] = rng.Uniform(-s, s);
    offset += out * in + out;
  }
  return Model{spec, std::move(w)};
}

/// Feed-forward classifier trained with a LossSpec. Batch loss is the mean of
/// per-example losses, so a batch gradient is the mean of per-example
/// gradients.
class NetworkObjective {
 public:
  using batch_type = Batch;

  NetworkObjective(ModelSpec spec, LossSpec loss) : spec_(std::move(spec)), loss_(loss) {
    spec_.Validate();
    loss_.Validate();
  }

  const ModelSpec& spec() const { return spec_; }
  const LossSpec& loss_spec() const { return loss_; }

  Matrix Forward(const ParamVector& w, const Batch& batch) const {
    CheckWeights(w);
    detail::CheckBatch(spec_, batch, /*need_labels=*/false);
    return std::move(detail::RunForward(spec_, w.span(), batch.inputs).outputs.back());
  }

  double Loss(const ParamVector& w, const Batch& batch) const {
    CheckWeights(w);
    detail::CheckBatch(spec_, batch, /*need_labels=*/true);
    const Matrix logits = detail::RunForward(spec_, w.span(), batch.inputs).outputs.back();
    std::vector<double> scratch(spec_.output_dim());
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
      total += detail::ExampleLoss(logits.row(r), batch.labels[r], loss_, scratch);
    }
    return total / static_cast<double>(logits.rows) + loss_.l2_strength() * Norm2(w);
  }

  ParamVector Gradient(const ParamVector& w, const Batch& batch) const {
    ParamVector g;
    LossAndGradient(w, batch, g);
    return g;
  }

  /// Reverse-mode pass; returns the loss and writes the gradient into `grad`.
  double LossAndGradient(const ParamVector& w, const Batch& batch, ParamVector& grad) const {
    CheckWeights(w);
    detail::CheckBatch(spec_, batch, /*need_labels=*/true);
    const detail::ForwardTrace trace = detail::RunForward(spec_, w.span(), batch.inputs);
    const Matrix& logits = trace.outputs.back();
    const std::size_t b = logits.rows;
    const double inv_b = 1.0 / static_cast<double>(b);

    Matrix delta(b, spec_.output_dim());
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      total += detail::ExampleLoss(logits.row(r), batch.labels[r], loss_, delta.row(r));
    }
    for (double& v : delta.data) v *= inv_b;

    grad = ParamVector(w.size());
    std::vector<std::size_t> offsets(spec_.num_layers());
    for (std::size_t l = 0, off = 0; l < spec_.num_layers(); ++l) {
      offsets[l] = off;
      off += spec_.layer_sizes[l + 1] * spec_.layer_sizes[l] + spec_.layer_sizes[l + 1];
    }

    for (std::size_t l = spec_.num_layers(); l-- > 0;) {
      const std::size_t in = spec_.layer_sizes[l];
      const std::size_t out = spec_.layer_sizes[l + 1];
      const Matrix& a = trace.outputs[l];
      double* gw = grad.span().data() + offsets[l];
      double* gb = gw + out * in;
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t o = 0; o < out; ++o) {
          const double d = delta(r, o);
          gb[o] += d;
          double* grow = gw + o * in;
          for (std::size_t i = 0; i < in; ++i) grow[i] += d * a(r, i);
        }
      }
      if (l == 0) break;
      const double* weight = w.span().data() + offsets[l];
      const Activation act = spec_.activations[l - 1];
      Matrix prev(b, in);
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t i = 0; i < in; ++i) {
          double sum = 0.0;
          for (std::size_t o = 0; o < out; ++o) sum += weight[o * in + i] * delta(r, o);
          prev(r, i) = sum * detail::ActivateDerivative(act, trace.pre[l - 1](r, i), a(r, i));
        }
      }
      delta = std::move(prev);
    }

    double loss = total * inv_b;
    if (const double lambda = loss_.l2_strength(); lambda > 0.0) {
      const double norm = Norm2(w);
      loss += lambda * norm;
      if (norm > 0.0) grad.Axpy(lambda / norm, w);
    }
    return loss;
  }

 private:
  void CheckWeights(const ParamVector& w) const {
    Require(w.size() == spec_.ParamCount(), ErrorKind::kShape,
            "weight vector has " + std::to_string(w.size()) + " entries, architecture needs " +
                std::to_string(spec_.ParamCount()));
  }

  ModelSpec spec_;
  LossSpec loss_;
};

/// One plain SGD update w - eta * grad. eta = 0 is allowed and is a no-op.
template <Objective O>
ParamVector SgdStep(const O& objective, const ParamVector& w, const BatchOf<O>& batch,
                    double eta) {
  Require(std::isfinite(eta) && eta >= 0.0, ErrorKind::kArgument,
          "learning rate must be finite and nonnegative");
  ParamVector g = objective.Gradient(w, batch);
  Require(g.AllFinite(), ErrorKind::kNumeric, "non-finite gradient");
  ParamVector next = w;
  next.Axpy(-eta, g);
  return next;
}

// Model-level conveniences.

inline Matrix Forward(const Model& model, const Batch& batch) {
  return NetworkObjective(model.spec, LossSpec{}).Forward(model.weights, batch);
}

inline double Loss(const Model& model, const Batch& batch, const LossSpec& spec) {
  return NetworkObjective(model.spec, spec).Loss(model.weights, batch);
}

inline ParamVector Grad(const Model& model, const Batch& batch, const LossSpec& spec) {
  return NetworkObjective(model.spec, spec).Gradient(model.weights, batch);
}

inline Model SgdStep(const Model& model, const Batch& batch, const LossSpec& spec, double eta) {
  return Model{model.spec, SgdStep(NetworkObjective(model.spec, spec), model.weights, batch, eta)};
}

/// Softmax of one logit row, max-shifted.
inline std::vector<double> Softmax(std::span<const double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) sum += (p[k] = std::exp(z[k] - zmax));
  for (double& v : p) v /= sum;
  return p;
}

/// Fraction of rows whose arg-max logit equals the label.
inline double Accuracy(const NetworkObjective& objective, const ParamVector& w,
                       const Batch& batch) {
  const Matrix logits = objective.Forward(w, batch);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const auto row = logits.row(r);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == batch.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows);
}

}  // namespace unlearn
