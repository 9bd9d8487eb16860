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
#include <vector>

#include "unlearn/error.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/param_vector.hpp"

namespace unlearn {

/// A quadratic term 0.5 * w'Aw - b'w. Plays the role of a batch for
/// QuadraticObjective so that sequences of distinct quadratics can be fed to
/// the same machinery as network batches.
struct QuadraticTerm {
  Matrix curvature;  // symmetric n x n
  ParamVector linear;

  static QuadraticTerm Diagonal(std::vector<double> diag) {
    QuadraticTerm q;
    q.curvature = Matrix(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) q.curvature(i, i) = diag[i];
    q.linear = ParamVector(diag.size());
    return q;
  }
};

/// Closed-form objective with constant Hessian; used as an exact oracle.
struct QuadraticObjective {
  using batch_type = QuadraticTerm;

  double Loss(const ParamVector& w, const QuadraticTerm& q) const {
    Check(w, q);
    double quad = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (std::size_t j = 0; j < w.size(); ++j) quad += w[i] * q.curvature(i, j) * w[j];
    }
    return 0.5 * quad - Dot(q.linear, w);
  }

  ParamVector Gradient(const ParamVector& w, const QuadraticTerm& q) const {
    Check(w, q);
    ParamVector g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      double s = -q.linear[i];
      for (std::size_t j = 0; j < w.size(); ++j) s += q.curvature(i, j) * w[j];
      g[i] = s;
    }
    return g;
  }

 private:
  static void Check(const ParamVector& w, const QuadraticTerm& q) {
    Require(q.curvature.rows == w.size() && q.curvature.cols == w.size() &&
                q.linear.size() == w.size(),
            ErrorKind::kShape, "quadratic term does not match parameter count");
  }
};

/// Real-valued targets for regression-style objectives.
struct RegressionBatch {
  Matrix inputs;
  std::vector<double> targets;

  std::size_t size() const { return inputs.rows; }
};

/// Mean of 0.5 * (w.x - y)^2. Linear model without bias; constant Hessian.
struct LeastSquaresObjective {
  using batch_type = RegressionBatch;

  double Loss(const ParamVector& w, const RegressionBatch& batch) const {
    Check(w, batch);
    double total = 0.0;
    for (std::size_t r = 0; r < batch.inputs.rows; ++r) {
      const double e = Predict(w, batch, r) - batch.targets[r];
      total += 0.5 * e * e;
    }
    return total / static_cast<double>(batch.inputs.rows);
  }

  ParamVector Gradient(const ParamVector& w, const RegressionBatch& batch) const {
    Check(w, batch);
    ParamVector g(w.size());
    const double inv_b = 1.0 / static_cast<double>(batch.inputs.rows);
    for (std::size_t r = 0; r < batch.inputs.rows; ++r) {
      const double e = Predict(w, batch, r) - batch.targets[r];
      for (std::size_t i = 0; i < w.size(); ++i) g[i] += inv_b * e * batch.inputs(r, i);
    }
    return g;
  }

  static double Predict(const ParamVector& w, const RegressionBatch& batch, std::size_t r) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * batch.inputs(r, i);
    return s;
  }

  static void Check(const ParamVector& w, const RegressionBatch& batch) {
    Require(batch.inputs.cols == w.size(), ErrorKind::kShape,
            "regression input width does not match parameter count");
    Require(batch.inputs.rows >= 1 && batch.targets.size() == batch.inputs.rows,
            ErrorKind::kShape, "regression batch needs one target per row");
  }
};

/// Mean of log(1 + exp(-y * w.x)) with targets in {-1, +1}. Smooth and
/// non-quadratic.
struct LogisticObjective {
  using batch_type = RegressionBatch;

  double Loss(const ParamVector& w, const RegressionBatch& batch) const {
    LeastSquaresObjective::Check(w, batch);
    double total = 0.0;
    for (std::size_t r = 0; r < batch.inputs.rows; ++r) {
      const double m = -batch.targets[r] * LeastSquaresObjective::Predict(w, batch, r);
      total += m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    }
    return total / static_cast<double>(batch.inputs.rows);
  }

  ParamVector Gradient(const ParamVector& w, const RegressionBatch& batch) const {
    LeastSquaresObjective::Check(w, batch);
    ParamVector g(w.size());
    const double inv_b = 1.0 / static_cast<double>(batch.inputs.rows);
    for (std::size_t r = 0; r < batch.inputs.rows; ++r) {
      const double y = batch.targets[r];
      const double m = -y * LeastSquaresObjective::Predict(w, batch, r);
      const double sig = 1.0 / (1.0 + std::exp(-m));  // d/dm log(1+e^m)
      for (std::size_t i = 0; i < w.size(); ++i) {
        g[i] += inv_b * sig * (-y) * batch.inputs(r, i);
      }
    }
    return g;
  }
};

static_assert(Objective<QuadraticObjective>);
static_assert(Objective<LeastSquaresObjective>);
static_assert(Objective<LogisticObjective>);
static_assert(Objective<NetworkObjective>);

}  // namespace unlearn
