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

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unlearn/error.hpp"
#include "unlearn/hessian.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/param_vector.hpp"

namespace unlearn {

enum class UnrollOrder { kFirstOnly, kFullRecursive };

/// Final weights predicted from gradients and curvature at the initial
/// weights, alongside what plain SGD actually produced.
struct UnrollResult {
  ParamVector predicted_final;
  ParamVector first_sum;   // -eta * sum_i grad(w0, batch_i)
  ParamVector second_sum;  // sum_i f(i); zero for kFirstOnly
  ParamVector eta2_slice;  // eta^2 * sum_i H_i sum_{j<i} grad_j; zero for kFirstOnly
  ParamVector actual_final;
  double residual_vs_sgd = 0.0;
};

/// Expands t SGD steps around w0:
///   w_t ~ w0 - eta * sum_i g_i + sum_i f(i),
///   f(i) = -eta * H_i (-eta * sum_{j<i} g_j + sum_{j<i} f(j)),  f(0) = 0,
/// where g_i and H_i are the gradient and Hessian of batch i at w0.
/// Every Hessian application is an HVP.
template <Objective O>
UnrollResult UnrollPredict(const O& objective, const ParamVector& w0,
                           std::span<const BatchOf<O>> batches, double eta,
                           const HvpConfig& cfg = {},
                           UnrollOrder order = UnrollOrder::kFullRecursive) {
  Require(!batches.empty(), ErrorKind::kArgument, "unroll needs at least one batch");
  Require(std::isfinite(eta) && eta >= 0.0, ErrorKind::kArgument, "learning rate must be >= 0");
  const std::size_t n = w0.size();

  UnrollResult out;
  out.first_sum = ParamVector(n);
  out.second_sum = ParamVector(n);
  out.eta2_slice = ParamVector(n);

  ParamVector grad_prefix(n);  // sum_{j<i} g_j
  ParamVector f_prefix(n);     // sum_{j<i} f(j)
  for (std::size_t i = 0; i < batches.size(); ++i) {
    if (order == UnrollOrder::kFullRecursive && i > 0) {
      ParamVector arg = f_prefix;
      arg.Axpy(-eta, grad_prefix);
      if (Norm2(arg) > 0.0) {
        ParamVector f = Hvp(objective, w0, batches[i], arg, cfg);
        f *= -eta;
        out.second_sum += f;
        f_prefix += f;
      }
      if (Norm2(grad_prefix) > 0.0) {
        out.eta2_slice.Axpy(eta * eta, Hvp(objective, w0, batches[i], grad_prefix, cfg));
      }
    }
    grad_prefix += objective.Gradient(w0, batches[i]);
  }
  out.first_sum.Axpy(-eta, grad_prefix);

  out.predicted_final = w0 + out.first_sum + out.second_sum;

  out.actual_final = w0;
  for (const auto& batch : batches) {
    out.actual_final = SgdStep(objective, out.actual_final, batch, eta);
  }
  out.residual_vs_sgd = Distance(out.predicted_final, out.actual_final);
  return out;
}

/// Number of Hessian-vector-product terms of the eta^2 slice
///   sum_{i=1}^{t-1} H_i sum_{j<i} g_j
/// that involve batch i_star (as H_i or as g_j). Always t - 1.
inline long long CountTermsWithTarget(long long t, long long i_star) {
  Require(t >= 1, ErrorKind::kArgument, "t must be >= 1");
  Require(i_star >= 0 && i_star < t, ErrorKind::kArgument,
          "target index " + std::to_string(i_star) + " outside [0, " + std::to_string(t) + ")");
  long long count = 0;
  for (long long i = 1; i < t; ++i) {
    for (long long j = 0; j < i; ++j) {
      if (i == i_star || j == i_star) ++count;
    }
  }
  return count;
}

struct ErrorInputs {
  double eta = 0.0;
  long long t = 1;
  double delta_w_norm = 0.0;
  double sigma_avg = 0.0;

  void Validate() const {
    Require(std::isfinite(eta) && eta >= 0.0, ErrorKind::kArgument, "eta must be finite and >= 0");
    Require(t >= 1, ErrorKind::kArgument, "t must be >= 1");
    Require(std::isfinite(delta_w_norm) && delta_w_norm >= 0.0, ErrorKind::kArgument,
            "delta_w_norm must be finite and >= 0");
    Require(std::isfinite(sigma_avg) && sigma_avg >= 0.0, ErrorKind::kArgument,
            "sigma_avg must be finite and >= 0");
  }
};

/// e = eta^2 * (||w_t - w_0|| / t) * sigma_avg * (t^2 - t) / 2
inline double UnlearningError(const ErrorInputs& in) {
  in.Validate();
  const double t = static_cast<double>(in.t);
  return in.eta * in.eta * (in.delta_w_norm / t) * in.sigma_avg * (t * t - t) / 2.0;
}

struct SigmaSample {
  long long step = 0;
  double sigma = 0.0;
};

inline double SigmaAverage(std::span<const SigmaSample> samples) {
  Require(!samples.empty(), ErrorKind::kArgument, "sigma average of an empty sample list");
  double sum = 0.0;
  for (const SigmaSample& s : samples) sum += s.sigma;
  return sum / static_cast<double>(samples.size());
}

}  // namespace unlearn
