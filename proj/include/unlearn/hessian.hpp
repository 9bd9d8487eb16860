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
#include <cstddef>
#include <cstdint>
#include <string>

#include "unlearn/error.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/param_vector.hpp"
#include "unlearn/rng.hpp"

namespace unlearn {

/// What "top singular value" reports. kSpectralNorm is max |eig(H)|;
/// kSqrtLambdaMax is sqrt(max(eig(H), 0)) and exists for sensitivity studies.
enum class SigmaMode { kSpectralNorm, kSqrtLambdaMax };

struct HvpConfig {
  double epsilon_scale = 1e-5;
  int power_iters_max = 100;
  double power_tol = 1e-6;
  std::uint64_t probe_seed = 0;
  SigmaMode sigma_mode = SigmaMode::kSpectralNorm;

  void Validate() const {
    Require(epsilon_scale > 0.0 && epsilon_scale <= 1e-2, ErrorKind::kArgument,
            "epsilon_scale must lie in (0, 1e-2]");
    Require(power_iters_max >= 1, ErrorKind::kArgument, "power_iters_max must be >= 1");
    Require(power_tol > 0.0, ErrorKind::kArgument, "power_tol must be > 0");
  }
};

/// H v by central differences of the gradient along v / ||v||, with step
/// epsilon_scale * (1 + ||w||_inf), rescaled by ||v||.
template <Objective O>
ParamVector Hvp(const O& objective, const ParamVector& w, const BatchOf<O>& batch,
                const ParamVector& v, const HvpConfig& cfg = {}) {
  cfg.Validate();
  Require(v.size() == w.size(), ErrorKind::kShape, "hvp direction length mismatch");
  const double vnorm = Norm2(v);
  Require(vnorm > 0.0, ErrorKind::kArgument, "hvp direction must be nonzero");
  const double eps = cfg.epsilon_scale * (1.0 + NormInf(w));
  const double step = eps / vnorm;

  ParamVector plus = w;
  plus.Axpy(step, v);
  ParamVector minus = w;
  minus.Axpy(-step, v);
  ParamVector out = objective.Gradient(plus, batch);
  out -= objective.Gradient(minus, batch);
  out *= vnorm / (2.0 * eps);
  return out;
}

struct DenseHessian {
  Matrix values;          // symmetrized
  double asymmetry = 0.0; // max |H - H'| before symmetrization
};

inline constexpr std::size_t kDenseHessianMaxParams = 400;

/// Column-by-column finite-difference Hessian. Test oracle for tiny models.
template <Objective O>
DenseHessian DenseHessianOf(const O& objective, const ParamVector& w, const BatchOf<O>& batch,
                            const HvpConfig& cfg = {}) {
  const std::size_t n = w.size();
  Require(n <= kDenseHessianMaxParams, ErrorKind::kSize,
          "dense Hessian limited to " + std::to_string(kDenseHessianMaxParams) +
              " parameters, got " + std::to_string(n));
  const double h = cfg.epsilon_scale * (1.0 + NormInf(w));
  Matrix raw(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    ParamVector plus = w;
    ParamVector minus = w;
    plus[i] += h;
    minus[i] -= h;
    const ParamVector gp = objective.Gradient(plus, batch);
    const ParamVector gm = objective.Gradient(minus, batch);
    for (std::size_t j = 0; j < n; ++j) raw(i, j) = (gp[j] - gm[j]) / (2.0 * h);
  }
  DenseHessian out;
  out.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.asymmetry = std::max(out.asymmetry, std::abs(raw(i, j) - raw(j, i)));
      out.values(i, j) = 0.5 * (raw(i, j) + raw(j, i));
    }
  }
  return out;
}

struct SigmaEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline ParamVector RandomUnitVector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  ParamVector x(n);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : x) v = rng.Normal();
    norm = Norm2(x);
  }
  x *= 1.0 / norm;
  return x;
}

// Power iteration for the dominant eigenvalue of `apply` (a symmetric PSD
// operator). Returns the final Rayleigh quotient.
template <class Apply>
SigmaEstimate PowerIterate(Apply&& apply, std::size_t n, const HvpConfig& cfg) {
  ParamVector x = RandomUnitVector(n, cfg.probe_seed);
  SigmaEstimate est;
  double previous = 0.0;
  for (int it = 1; it <= cfg.power_iters_max; ++it) {
    ParamVector y = apply(x);
    const double rayleigh = Dot(x, y);
    const double ynorm = Norm2(y);
    est.value = rayleigh;
    est.iterations = it;
    if (ynorm == 0.0) {
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    if (it > 1 && std::abs(rayleigh - previous) <= cfg.power_tol * std::abs(rayleigh)) {
      est.converged = true;
      return est;
    }
    previous = rayleigh;
    y *= 1.0 / ynorm;
    x = std::move(y);
  }
  return est;
}

}  // namespace detail

/// Largest singular value of the loss Hessian at (w, batch), by power
/// iteration on H^2 (two HVPs per iteration). Non-convergence is reported
/// through the flag, never thrown.
template <Objective O>
SigmaEstimate TopSingularValue(const O& objective, const ParamVector& w, const BatchOf<O>& batch,
                               const HvpConfig& cfg = {}) {
  cfg.Validate();
  Require(!w.empty(), ErrorKind::kArgument, "model has no parameters");
  const auto h = [&](const ParamVector& x) -> ParamVector {
    if (Norm2(x) == 0.0) return ParamVector(x.size());
    return Hvp(objective, w, batch, x, cfg);
  };
  SigmaEstimate squared = detail::PowerIterate(
      [&](const ParamVector& x) { return h(h(x)); }, w.size(), cfg);
  const double spectral = std::sqrt(std::max(squared.value, 0.0));
  if (cfg.sigma_mode == SigmaMode::kSpectralNorm) {
    return SigmaEstimate{spectral, squared.converged, squared.iterations};
  }
  // Shift by the spectral norm so the dominant eigenvalue of H + sI is the
  // algebraically largest one of H.
  SigmaEstimate shifted = detail::PowerIterate(
      [&](const ParamVector& x) {
        ParamVector y = h(x);
        y.Axpy(spectral, x);
        return y;
      },
      w.size(), cfg);
  const double lambda_max = shifted.value - spectral;
  return SigmaEstimate{std::sqrt(std::max(lambda_max, 0.0)),
                       squared.converged && shifted.converged,
                       squared.iterations + shifted.iterations};
}

/// Rayleigh quotient u'Hu along the unit direction of `direction`.
template <Objective O>
double DirectionalCurvature(const O& objective, const ParamVector& w, const BatchOf<O>& batch,
                            const ParamVector& direction, const HvpConfig& cfg = {}) {
  const double norm = Norm2(direction);
  if (norm == 0.0) return 0.0;
  ParamVector u = direction;
  u *= 1.0 / norm;
  return Dot(u, Hvp(objective, w, batch, u, cfg));
}

}  // namespace unlearn
