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

// Shared fixtures for the unit tests: random models and batches plus a
// central-difference gradient that never touches the analytic backward pass.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "unlearn/nn.hpp"
#include "unlearn/rng.hpp"

namespace unlearn::testing {

inline Batch RandomBatch(std::size_t rows, std::size_t width, int classes, Rng& rng) {
  Batch b;
  b.inputs = Matrix(rows, width);
  for (double& x : b.inputs.data) x = rng.Normal();
  for (std::size_t r = 0; r < rows; ++r) b.labels.push_back(static_cast<int>(rng.Below(classes)));
  return b;
}

inline ParamVector RandomWeights(std::size_t n, Rng& rng, double scale = 0.7) {
  ParamVector w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = scale * rng.Normal();
  return w;
}

template <class F>
ParamVector CentralDifference(F&& f, const ParamVector& w, double rel_step = 1e-6) {
  ParamVector g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double h = rel_step * (1.0 + std::abs(w[i]));
    ParamVector plus = w, minus = w;
    plus[i] += h;
    minus[i] -= h;
    g[i] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(|a|, |b|, floor): relative error with an absolute floor so
// that coordinates whose gradient is numerically zero do not dominate.
inline double MaxRelativeError(const ParamVector& a, const ParamVector& b, double floor = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace unlearn::testing
