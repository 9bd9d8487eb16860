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
#include <optional>
#include <vector>

#include "unlearn/error.hpp"
#include "unlearn/param_vector.hpp"

namespace unlearn::analysis {

/// Two-output SD loss in terms of the logits (a, b):
///   -log softmax_label + gamma * sqrt((a^2 + b^2 - 0.5 (a + b)^2) / 2).
/// The cross-entropy part is evaluated as log1p(exp(.)) in a stable form.
inline double SdLossBinary(double a, double b, double gamma, int label = 0) {
  const double margin = label == 0 ? b - a : a - b;
  const double ce = margin > 0.0 ? margin + std::log1p(std::exp(-margin))
                                 : std::log1p(std::exp(margin));
  const double var = (a * a + b * b - 0.5 * (a + b) * (a + b)) / 2.0;
  return ce + gamma * std::sqrt(std::max(var, 0.0));
}

struct BinaryGradient {
  double da = 0.0;
  double db = 0.0;
};

/// Analytic gradient of SdLossBinary. The SD term is |a - b| / 2, whose
/// subgradient at a = b is taken as 0.
inline BinaryGradient SdLossBinaryGradient(double a, double b, double gamma, int label = 0) {
  const double diff = a - b;
  // d/d(a-b) of log(1 + exp(-(a-b))) for label 0.
  const double s = label == 0 ? -1.0 / (1.0 + std::exp(diff)) : 1.0 / (1.0 + std::exp(-diff));
  const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
  const double sd = 0.5 * gamma * sign;
  return BinaryGradient{s + sd, -s - sd};
}

struct LandscapeRow {
  double a = 0.0;
  double b = 0.0;
  double loss = 0.0;
  double neg_grad_a = 0.0;
  double neg_grad_b = 0.0;
};

struct Landscape {
  double gamma = 0.0;
  std::vector<LandscapeRow> rows;
  /// Mean a - b where -dL/da changes sign along a grid row; empty if no
  /// row has a sign change.
  std::optional<double> flip_offset;
};

/// Loss and negative gradient on a resolution x resolution grid (label 0).
inline Landscape LandscapeGrid(double gamma, double a_lo, double a_hi, double b_lo, double b_hi,
                               std::size_t resolution) {
  Require(resolution >= 2, ErrorKind::kArgument, "landscape resolution must be >= 2");
  Require(a_hi > a_lo && b_hi > b_lo, ErrorKind::kArgument, "landscape ranges must be nonempty");
  Landscape out;
  out.gamma = gamma;
  double offset_sum = 0.0;
  std::size_t flips = 0;
  for (std::size_t j = 0; j < resolution; ++j) {
    const double b = b_lo + (b_hi - b_lo) * j / (resolution - 1);
    double prev_a = 0.0, prev_g = 0.0;
    for (std::size_t i = 0; i < resolution; ++i) {
      const double a = a_lo + (a_hi - a_lo) * i / (resolution - 1);
      const BinaryGradient g = SdLossBinaryGradient(a, b, gamma);
      out.rows.push_back(LandscapeRow{a, b, SdLossBinary(a, b, gamma), -g.da, -g.db});
      if (i > 0 && prev_g > 0.0 && -g.da <= 0.0) {
        offset_sum += 0.5 * (prev_a + a) - b;
        ++flips;
      }
      prev_a = a;
      prev_g = -g.da;
    }
  }
  if (flips > 0) out.flip_offset = offset_sum / static_cast<double>(flips);
  return out;
}

/// Minimizer of ||u1||^2 + ||u2||^2 subject to (u1 - u2).x = epsilon.
struct LagrangianSolution {
  ParamVector u1;
  ParamVector u2;
  double epsilon = 0.0;
  double squared_norm = 0.0;
  double constraint_residual = 0.0;
};

inline LagrangianSolution MinWeightChange(const ParamVector& x, double epsilon) {
  const double xx = Dot(x, x);
  Require(xx > 0.0, ErrorKind::kArgument, "x must be nonzero");
  LagrangianSolution s;
  s.epsilon = epsilon;
  s.u1 = (epsilon / (2.0 * xx)) * x;
  s.u2 = -1.0 * s.u1;
  s.squared_norm = Dot(s.u1, s.u1) + Dot(s.u2, s.u2);
  s.constraint_residual = std::abs(Dot(s.u1 - s.u2, x) - epsilon);
  return s;
}

/// Best-case SISA unlearning cost as a fraction of retraining: 2S / (R + 1).
inline double SisaCostRatio(long long shards, long long slices) {
  Require(shards >= 1 && slices >= 1, ErrorKind::kArgument, "S and R must be positive");
  return 2.0 * static_cast<double>(shards) / (static_cast<double>(slices) + 1.0);
}

/// One gradient out of N training steps.
inline double SingleGradientCostRatio(long long steps) {
  Require(steps >= 1, ErrorKind::kArgument, "N must be positive");
  return 1.0 / static_cast<double>(steps);
}

/// Size R (or S) SISA needs before it can beat a single gradient: sqrt(N)/2 - 1.
inline double SisaBreakeven(long long steps) {
  Require(steps >= 1, ErrorKind::kArgument, "N must be positive");
  return std::sqrt(static_cast<double>(steps)) / 2.0 - 1.0;
}

}  // namespace unlearn::analysis
