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
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "unlearn/error.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/objectives.hpp"
#include "unlearn/param_vector.hpp"

namespace unlearn::analysis {

// Weight-distribution bounds for SGD with batch size 1 and Gaussian noise g
// added to the final weights (the same g with and without the target).
// Every ordering of the data is enumerated, so each density is an exact
// equal-weight Gaussian mixture and only the grid evaluation is approximate.

enum class PointLoss { kSquared, kLogistic };

struct GridSpec {
  double halfwidth_sigmas = 8.0;
  std::size_t points_1d = 4001;
  std::size_t points_2d = 301;  // per axis
};

struct BoundScenario {
  RegressionBatch points;  // n rows; columns = parameter count (1 or 2)
  std::size_t target = 0;  // row index of the point being unlearned
  int m_epochs = 1;
  double eta = 0.1;
  double noise_sigma = 0.1;
  ParamVector w0;
  PointLoss loss = PointLoss::kSquared;
  GridSpec grid;

  std::size_t dim() const { return w0.size(); }
  std::size_t n() const { return points.size(); }
};

/// Lipschitz constant of an isotropic Gaussian density: sup ||grad phi||.
inline double GaussianLipschitz(double sigma, std::size_t dim) {
  Require(sigma > 0.0, ErrorKind::kArgument, "noise sigma must be positive");
  Require(dim == 1 || dim == 2, ErrorKind::kArgument, "only 1 or 2 parameters supported");
  if (dim == 1) return 1.0 / (sigma * sigma * std::sqrt(2.0 * std::numbers::pi * std::numbers::e));
  return 1.0 / (2.0 * std::numbers::pi * sigma * sigma * sigma * std::sqrt(std::numbers::e));
}

/// Equal-weight isotropic Gaussian mixture in 1 or 2 dimensions.
struct GaussianMixture {
  std::vector<ParamVector> means;
  double sigma = 1.0;

  double Density(std::span<const double> w) const {
    const std::size_t dim = w.size();
    const double norm = dim == 1 ? 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi))
                                 : 1.0 / (2.0 * std::numbers::pi * sigma * sigma);
    double sum = 0.0;
    for (const ParamVector& mu : means) {
      double r2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) r2 += (w[k] - mu[k]) * (w[k] - mu[k]);
      sum += std::exp(-0.5 * r2 / (sigma * sigma));
    }
    return norm * sum / static_cast<double>(means.size());
  }

  ParamVector Mean() const {
    ParamVector m(means.front().size());
    for (const ParamVector& mu : means) m += mu;
    m *= 1.0 / static_cast<double>(means.size());
    return m;
  }
};

/// Axis-aligned evaluation box with uniform spacing.
struct Grid {
  std::vector<double> lo, hi;
  std::size_t points = 0;  // per axis

  double Step(std::size_t axis) const {
    return (hi[axis] - lo[axis]) / static_cast<double>(points - 1);
  }
  double Coord(std::size_t axis, std::size_t i) const { return lo[axis] + Step(axis) * i; }

  template <class F>
  void ForEach(F&& f) const {
    if (lo.size() == 1) {
      for (std::size_t i = 0; i < points; ++i) {
        const double w[1] = {Coord(0, i)};
        f(std::span<const double>(w, 1));
      }
      return;
    }
    for (std::size_t i = 0; i < points; ++i) {
      for (std::size_t j = 0; j < points; ++j) {
        const double w[2] = {Coord(0, i), Coord(1, j)};
        f(std::span<const double>(w, 2));
      }
    }
  }
};

/// Box covering every mixture mean +- halfwidth_sigmas * sigma.
inline Grid MakeGrid(std::span<const GaussianMixture* const> mixtures, const GridSpec& spec) {
  Require(!mixtures.empty() && !mixtures.front()->means.empty(), ErrorKind::kGrid,
          "grid needs at least one mixture component");
  const std::size_t dim = mixtures.front()->means.front().size();
  Grid g;
  g.lo.assign(dim, INFINITY);
  g.hi.assign(dim, -INFINITY);
  double sigma = 0.0;
  for (const GaussianMixture* m : mixtures) {
    sigma = std::max(sigma, m->sigma);
    for (const ParamVector& mu : m->means) {
      for (std::size_t k = 0; k < dim; ++k) {
        g.lo[k] = std::min(g.lo[k], mu[k]);
        g.hi[k] = std::max(g.hi[k], mu[k]);
      }
    }
  }
  for (std::size_t k = 0; k < dim; ++k) {
    g.lo[k] -= spec.halfwidth_sigmas * sigma;
    g.hi[k] += spec.halfwidth_sigmas * sigma;
  }
  g.points = dim == 1 ? spec.points_1d : spec.points_2d;
  Require(g.points >= 2, ErrorKind::kGrid, "grid needs at least 2 points per axis");
  return g;
}

/// Probability mass of a mixture inside the grid box, computed analytically.
inline double MassInside(const GaussianMixture& mix, const Grid& grid) {
  const double s = mix.sigma * std::numbers::sqrt2;
  double total = 0.0;
  for (const ParamVector& mu : mix.means) {
    double mass = 1.0;
    for (std::size_t k = 0; k < grid.lo.size(); ++k) {
      mass *= 0.5 * (std::erf((grid.hi[k] - mu[k]) / s) - std::erf((grid.lo[k] - mu[k]) / s));
    }
    total += mass;
  }
  return total / static_cast<double>(mix.means.size());
}

inline double SupDifference(const GaussianMixture& a, const GaussianMixture& b, const Grid& grid) {
  double sup = 0.0;
  grid.ForEach([&](std::span<const double> w) {
    sup = std::max(sup, std::abs(a.Density(w) - b.Density(w)));
  });
  return sup;
}

/// Integral of ||w|| over the grid box (closed form in 1D, midpoint rule in 2D).
inline double NormIntegral(const Grid& grid) {
  if (grid.lo.size() == 1) {
    const auto antiderivative = [](double x) { return 0.5 * x * std::abs(x); };
    return antiderivative(grid.hi[0]) - antiderivative(grid.lo[0]);
  }
  const std::size_t cells = 2000;
  const double hx = (grid.hi[0] - grid.lo[0]) / cells;
  const double hy = (grid.hi[1] - grid.lo[1]) / cells;
  double sum = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    const double x = grid.lo[0] + (i + 0.5) * hx;
    for (std::size_t j = 0; j < cells; ++j) {
      const double y = grid.lo[1] + (j + 0.5) * hy;
      sum += std::sqrt(x * x + y * y);
    }
  }
  return sum * hx * hy;
}

/// Unlearning update u_I that may depend only on w0 and the ordering.
using UnlearnRule =
    std::function<ParamVector(const ParamVector& w0, std::span<const std::size_t> ordering)>;

/// Final weights for every ordering, with and without the target point.
struct OrderingFinals {
  std::vector<std::vector<std::size_t>> orderings;
  std::vector<ParamVector> with_target;     // w_I
  std::vector<ParamVector> without_target;  // w_I' = w_I - d_I
};

inline constexpr std::size_t kMaxOrderings = 2'000'000;

namespace detail {

inline ParamVector PointGradient(const BoundScenario& scn, const ParamVector& w, std::size_t row) {
  RegressionBatch one;
  one.inputs = Matrix(1, scn.points.inputs.cols,
                      std::vector<double>(scn.points.inputs.row(row).begin(),
                                          scn.points.inputs.row(row).end()));
  one.targets = {scn.points.targets[row]};
  if (scn.loss == PointLoss::kSquared) return LeastSquaresObjective{}.Gradient(w, one);
  return LogisticObjective{}.Gradient(w, one);
}

inline void ValidateScenario(const BoundScenario& scn) {
  Require(scn.dim() == 1 || scn.dim() == 2, ErrorKind::kArgument,
          "bound scenarios support 1 or 2 parameters");
  Require(scn.points.inputs.cols == scn.dim(), ErrorKind::kShape,
          "scenario points do not match the parameter count");
  Require(scn.n() >= 2 && scn.n() <= 5, ErrorKind::kEnumeration,
          "scenario size must be between 2 and 5 points");
  Require(scn.target < scn.n(), ErrorKind::kArgument, "target index out of range");
  Require(scn.m_epochs >= 1, ErrorKind::kArgument, "m_epochs must be >= 1");
  Require(scn.noise_sigma > 0.0, ErrorKind::kArgument, "noise_sigma must be positive");
  double count = 1.0;
  double fact = 1.0;
  for (std::size_t k = 2; k <= scn.n(); ++k) fact *= static_cast<double>(k);
  for (int e = 0; e < scn.m_epochs; ++e) count *= fact;
  Require(count <= static_cast<double>(kMaxOrderings), ErrorKind::kEnumeration,
          "too many orderings to enumerate: " + std::to_string(count));
}

}  // namespace detail

/// Enumerates all n!^m orderings and replays SGD exactly for each.
inline OrderingFinals EnumerateFinals(const BoundScenario& scn) {
  detail::ValidateScenario(scn);
  std::vector<std::size_t> perm(scn.n());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::vector<std::vector<std::size_t>> epoch_perms;
  do {
    epoch_perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  OrderingFinals out;
  std::vector<std::size_t> choice(static_cast<std::size_t>(scn.m_epochs), 0);
  while (true) {
    std::vector<std::size_t> ordering;
    for (std::size_t e : choice) {
      ordering.insert(ordering.end(), epoch_perms[e].begin(), epoch_perms[e].end());
    }
    ParamVector w = scn.w0;
    ParamVector w_prime = scn.w0;
    for (std::size_t row : ordering) {
      w.Axpy(-scn.eta, detail::PointGradient(scn, w, row));
      if (row != scn.target) w_prime.Axpy(-scn.eta, detail::PointGradient(scn, w_prime, row));
    }
    out.orderings.push_back(std::move(ordering));
    out.with_target.push_back(std::move(w));
    out.without_target.push_back(std::move(w_prime));

    std::size_t k = 0;
    while (k < choice.size() && ++choice[k] == epoch_perms.size()) choice[k++] = 0;
    if (k == choice.size()) break;
  }
  return out;
}

struct DensityBoundReport {
  double sup_diff = 0.0;
  double lipschitz = 0.0;
  double d = 0.0;
  bool bound_holds = false;
  double slack = 0.0;  // L*d - sup_diff
};

struct UnlearnBoundReport {
  double sup_diff = 0.0;
  double lipschitz = 0.0;
  double v = 0.0;
  double d = 0.0;
  bool bound_holds = false;
  bool improves_on_d = false;  // v <= d
  double slack = 0.0;
};

struct ReverseReport {
  double v = 0.0;       // ||E[P''] - E[P']||
  double b_sup = 0.0;   // grid sup |P'' - P'|
  double a_mass = 0.0;  // integral of ||w|| over the grid
  bool holds = false;
  double slack = 0.0;
};

namespace detail {

inline bool WithinBound(double lhs, double rhs) { return lhs <= rhs * (1.0 + 1e-12); }

inline void RequireCoverage(const Grid& grid, std::initializer_list<const GaussianMixture*> mixes) {
  for (const GaussianMixture* m : mixes) {
    const double mass = MassInside(*m, grid);
    if (mass < 1.0 - 1e-6) {
      Fail(ErrorKind::kGrid, "grid covers only " + std::to_string(mass) + " of a mixture's mass");
    }
  }
}

}  // namespace detail

/// sup |P - P'| <= L * d with d the mean ||d_I||.
inline DensityBoundReport CheckDensityBound(const BoundScenario& scn) {
  const OrderingFinals finals = EnumerateFinals(scn);
  const GaussianMixture p{finals.with_target, scn.noise_sigma};
  const GaussianMixture p_prime{finals.without_target, scn.noise_sigma};
  const GaussianMixture* mixes[] = {&p, &p_prime};
  const Grid grid = MakeGrid(mixes, scn.grid);

  DensityBoundReport r;
  for (std::size_t i = 0; i < finals.orderings.size(); ++i) {
    r.d += Distance(finals.with_target[i], finals.without_target[i]);
  }
  r.d /= static_cast<double>(finals.orderings.size());
  r.lipschitz = GaussianLipschitz(scn.noise_sigma, scn.dim());
  r.sup_diff = SupDifference(p, p_prime, grid);
  r.bound_holds = detail::WithinBound(r.sup_diff, r.lipschitz * r.d);
  r.slack = r.lipschitz * r.d - r.sup_diff;
  return r;
}

/// The single-gradient rule at w0: u_I = eta * (occurrences of x* in I) * grad(w0, x*).
inline UnlearnRule SingleGradientRule(const BoundScenario& scn) {
  return [scn](const ParamVector& w0, std::span<const std::size_t> ordering) {
    const auto occurrences = std::count(ordering.begin(), ordering.end(), scn.target);
    ParamVector u = detail::PointGradient(scn, w0, scn.target);
    u *= scn.eta * static_cast<double>(occurrences);
    return u;
  };
}

/// sup |P'' - P'| <= L * v with v the mean ||d_I + u_I||.
inline UnlearnBoundReport CheckUnlearnBound(const BoundScenario& scn, const UnlearnRule& rule) {
  const OrderingFinals finals = EnumerateFinals(scn);
  std::vector<ParamVector> unlearned;
  UnlearnBoundReport r;
  for (std::size_t i = 0; i < finals.orderings.size(); ++i) {
    const ParamVector u = rule(scn.w0, finals.orderings[i]);
    Require(u.size() == scn.dim(), ErrorKind::kShape, "unlearning update has the wrong length");
    unlearned.push_back(finals.with_target[i] + u);
    r.v += Distance(unlearned.back(), finals.without_target[i]);
    r.d += Distance(finals.with_target[i], finals.without_target[i]);
  }
  r.v /= static_cast<double>(finals.orderings.size());
  r.d /= static_cast<double>(finals.orderings.size());

  const GaussianMixture p2{std::move(unlearned), scn.noise_sigma};
  const GaussianMixture p_prime{finals.without_target, scn.noise_sigma};
  const GaussianMixture* mixes[] = {&p2, &p_prime};
  const Grid grid = MakeGrid(mixes, scn.grid);
  r.lipschitz = GaussianLipschitz(scn.noise_sigma, scn.dim());
  r.sup_diff = SupDifference(p2, p_prime, grid);
  r.bound_holds = detail::WithinBound(r.sup_diff, r.lipschitz * r.v);
  r.improves_on_d = r.v <= r.d;
  r.slack = r.lipschitz * r.v - r.sup_diff;
  return r;
}

/// ||E[A] - E[B]|| <= sup|A - B| * integral ||w|| over a box holding both.
inline ReverseReport CheckReverseBound(const GaussianMixture& a, const GaussianMixture& b,
                                       const GridSpec& spec) {
  const GaussianMixture* mixes[] = {&a, &b};
  const Grid grid = MakeGrid(mixes, spec);
  detail::RequireCoverage(grid, {&a, &b});
  ReverseReport r;
  r.v = Distance(a.Mean(), b.Mean());
  r.b_sup = SupDifference(a, b, grid);
  r.a_mass = NormIntegral(grid);
  r.holds = detail::WithinBound(r.v, r.b_sup * r.a_mass);
  r.slack = r.b_sup * r.a_mass - r.v;
  return r;
}

/// Reverse bound between the single-gradient unlearned and retrained
/// distributions of a scenario.
inline ReverseReport CheckReverseBound(const BoundScenario& scn) {
  const OrderingFinals finals = EnumerateFinals(scn);
  const UnlearnRule rule = SingleGradientRule(scn);
  std::vector<ParamVector> unlearned;
  for (std::size_t i = 0; i < finals.orderings.size(); ++i) {
    unlearned.push_back(finals.with_target[i] + rule(scn.w0, finals.orderings[i]));
  }
  return CheckReverseBound(GaussianMixture{std::move(unlearned), scn.noise_sigma},
                           GaussianMixture{finals.without_target, scn.noise_sigma}, scn.grid);
}

/// Two-point, one-parameter quadratic scenario used as the CLI default.
inline BoundScenario DefaultScenario() {
  BoundScenario scn;
  scn.points.inputs = Matrix(2, 1, {1.0, 0.5});
  scn.points.targets = {1.0, -2.0};
  scn.target = 0;
  scn.eta = 0.1;
  scn.noise_sigma = 0.1;
  scn.w0 = ParamVector{0.0};
  return scn;
}

}  // namespace unlearn::analysis
