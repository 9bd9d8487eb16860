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

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "support.hpp"
#include "unlearn/hessian.hpp"
#include "unlearn/objectives.hpp"

namespace unlearn {
namespace {

using testing::RandomBatch;
using testing::RandomWeights;

// Independent eigenvalue oracle.
double MaxAbsEigen(const Matrix& h) {
  Eigen::MatrixXd m(h.rows, h.cols);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) m(i, j) = h(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double MaxEigen(const Matrix& h) {
  Eigen::MatrixXd m(h.rows, h.cols);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) m(i, j) = h(i, j);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().maxCoeff();
}

ParamVector Times(const Matrix& h, const ParamVector& v) {
  ParamVector out(h.rows);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) out[i] += h(i, j) * v[j];
  return out;
}

// Loss scaled by a constant; curvature scales with it.
struct Scaled {
  using batch_type = Batch;
  NetworkObjective inner;
  double kappa;
  double Loss(const ParamVector& w, const Batch& b) const { return kappa * inner.Loss(w, b); }
  ParamVector Gradient(const ParamVector& w, const Batch& b) const {
    return kappa * inner.Gradient(w, b);
  }
};

struct TinyNet {
  ModelSpec spec;
  NetworkObjective obj;
  ParamVector w;
  Batch batch;
};

TinyNet MakeTinyNet(std::uint64_t seed, Activation act = Activation::kTanh,
                    std::vector<std::size_t> sizes = {3, 4, 2}) {
  Rng rng(seed);
  ModelSpec spec = ModelSpec::Mlp(sizes, act);
  const std::size_t n = spec.ParamCount();
  Batch batch = RandomBatch(8, sizes.front(), static_cast<int>(sizes.back()), rng);
  return TinyNet{spec, NetworkObjective(spec, LossSpec{}), RandomWeights(n, rng), batch};
}

TEST(Hvp, ConstantCurvatureOneParameter) {
  const QuadraticObjective q;
  const ParamVector hv = Hvp(q, ParamVector{0.7}, QuadraticTerm::Diagonal({3.0}), ParamVector{2.0});
  EXPECT_NEAR(hv[0], 6.0, 1e-9);
}

TEST(Hvp, MatchesDenseProductOnLinearModel) {
  TinyNet net = MakeTinyNet(2, Activation::kIdentity, {3, 3});
  const DenseHessian dense = DenseHessianOf(net.obj, net.w, net.batch);
  Rng rng(8);
  for (int k = 0; k < 5; ++k) {
    const ParamVector v = RandomWeights(net.w.size(), rng, 1.0);
    const ParamVector hv = Hvp(net.obj, net.w, net.batch, v);
    const ParamVector ref = Times(dense.values, v);
    EXPECT_LE(Distance(hv, ref) / Norm2(ref), 1e-3);
  }
}

TEST(Hvp, ZeroDirectionIsArgumentError) {
  TinyNet net = MakeTinyNet(1);
  try {
    Hvp(net.obj, net.w, net.batch, ParamVector(net.w.size()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kArgument);
  }
}

TEST(Hvp, HomogeneousInScale) {
  TinyNet net = MakeTinyNet(3);
  Rng rng(4);
  const ParamVector v = RandomWeights(net.w.size(), rng, 1.0);
  const ParamVector hv = Hvp(net.obj, net.w, net.batch, v);
  const ParamVector h2v = Hvp(net.obj, net.w, net.batch, 2.0 * v);
  EXPECT_LE(Distance(h2v, 2.0 * hv), 1e-9 * Norm2(h2v));
}

TEST(Hvp, LinearInDirection) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    TinyNet net = MakeTinyNet(100 + trial);
    const ParamVector u = RandomWeights(net.w.size(), rng, 1.0);
    const ParamVector v = RandomWeights(net.w.size(), rng, 1.0);
    const double a = 0.3 + rng.Uniform(), b = -1.0 + rng.Uniform();
    ParamVector combo = a * u;
    combo.Axpy(b, v);
    ParamVector expected = a * Hvp(net.obj, net.w, net.batch, u);
    expected.Axpy(b, Hvp(net.obj, net.w, net.batch, v));
    EXPECT_LE(Distance(Hvp(net.obj, net.w, net.batch, combo), expected),
              1e-6 * (Norm2(u) + Norm2(v)));
  }
}

TEST(DenseHessianTest, QuadraticDiagonal) {
  const QuadraticObjective q;
  const DenseHessian h = DenseHessianOf(q, ParamVector{0.4, -1.0}, QuadraticTerm::Diagonal({3.0, 5.0}));
  EXPECT_NEAR(h.values(0, 0), 3.0, 1e-6);
  EXPECT_NEAR(h.values(1, 1), 5.0, 1e-6);
  EXPECT_NEAR(h.values(0, 1), 0.0, 1e-6);
  EXPECT_NEAR(MaxAbsEigen(h.values), 5.0, 1e-6);
}

TEST(DenseHessianTest, NearlySymmetricBeforeSymmetrizing) {
  TinyNet net = MakeTinyNet(6);
  const DenseHessian h = DenseHessianOf(net.obj, net.w, net.batch);
  EXPECT_LE(h.asymmetry, 1e-4);
  for (std::size_t i = 0; i < h.values.rows; ++i)
    for (std::size_t j = 0; j < i; ++j) EXPECT_EQ(h.values(i, j), h.values(j, i));
}

TEST(DenseHessianTest, SizeGuard) {
  const ModelSpec spec = ModelSpec::Mlp({10, 30, 3}, Activation::kTanh);
  ASSERT_GT(spec.ParamCount(), kDenseHessianMaxParams);
  Rng rng(1);
  try {
    DenseHessianOf(NetworkObjective(spec, LossSpec{}), ParamVector(spec.ParamCount()),
                   RandomBatch(2, 10, 3, rng));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSize);
  }
}

TEST(TopSingular, IndefiniteQuadratic) {
  const QuadraticObjective q;
  QuadraticTerm term;
  term.curvature = Matrix(2, 2, {3.0, 0.0, 0.0, -5.0});
  term.linear = ParamVector(2);
  const SigmaEstimate s = TopSingularValue(q, ParamVector{0.2, 0.1}, term);
  EXPECT_NEAR(s.value, 5.0, 1e-5);
  EXPECT_TRUE(s.converged);
}

TEST(TopSingular, ZeroHessian) {
  const QuadraticObjective q;
  const SigmaEstimate s = TopSingularValue(q, ParamVector{1.0, 2.0}, QuadraticTerm::Diagonal({0.0, 0.0}));
  EXPECT_EQ(s.value, 0.0);
}

TEST(TopSingular, SqrtLambdaModeDiffersOnIndefinite) {
  const QuadraticObjective q;
  QuadraticTerm term;
  term.curvature = Matrix(2, 2, {4.0, 0.0, 0.0, -9.0});
  term.linear = ParamVector(2);
  HvpConfig cfg;
  cfg.sigma_mode = SigmaMode::kSqrtLambdaMax;
  cfg.power_iters_max = 500;
  EXPECT_NEAR(TopSingularValue(q, ParamVector{0.0, 0.0}, term, cfg).value, 2.0, 1e-3);
}

TEST(TopSingular, MatchesDenseEigenOnRandomNets) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    // 3-4-2 tanh: 26 parameters.
    TinyNet net = MakeTinyNet(500 + seed);
    const DenseHessian dense = DenseHessianOf(net.obj, net.w, net.batch);
    HvpConfig cfg;
    cfg.power_iters_max = 1000;
    cfg.power_tol = 1e-10;
    const double ref = MaxAbsEigen(dense.values);
    EXPECT_LE(std::abs(TopSingularValue(net.obj, net.w, net.batch, cfg).value - ref) / ref, 1e-3)
        << "seed " << seed;
  }
}

TEST(TopSingular, SqrtLambdaMatchesDenseOnRandomNet) {
  TinyNet net = MakeTinyNet(42);
  HvpConfig cfg;
  cfg.sigma_mode = SigmaMode::kSqrtLambdaMax;
  cfg.power_iters_max = 2000;
  cfg.power_tol = 1e-12;
  const double ref = std::sqrt(std::max(MaxEigen(DenseHessianOf(net.obj, net.w, net.batch).values), 0.0));
  EXPECT_NEAR(TopSingularValue(net.obj, net.w, net.batch, cfg).value, ref, 1e-3 * ref);
}

TEST(TopSingular, ScalesWithLoss) {
  TinyNet net = MakeTinyNet(9);
  HvpConfig cfg;
  cfg.power_tol = 1e-12;
  cfg.power_iters_max = 2000;
  const double base = TopSingularValue(Scaled{net.obj, 1.0}, net.w, net.batch, cfg).value;
  const double scaled = TopSingularValue(Scaled{net.obj, 3.5}, net.w, net.batch, cfg).value;
  EXPECT_NEAR(scaled / base, 3.5, 3.5e-6);
}

TEST(TopSingular, SeedDeterministic) {
  TinyNet net = MakeTinyNet(10);
  HvpConfig cfg;
  cfg.probe_seed = 17;
  const double a = TopSingularValue(net.obj, net.w, net.batch, cfg).value;
  const double b = TopSingularValue(net.obj, net.w, net.batch, cfg).value;
  EXPECT_EQ(a, b);
}

TEST(TopSingular, IterationCapReportsNotConverged) {
  TinyNet net = MakeTinyNet(11);
  HvpConfig cfg;
  cfg.power_iters_max = 2;
  cfg.power_tol = 1e-15;
  const SigmaEstimate s = TopSingularValue(net.obj, net.w, net.batch, cfg);
  EXPECT_FALSE(s.converged);
  EXPECT_GT(s.value, 0.0);
}

TEST(HvpConfigTest, Validation) {
  HvpConfig cfg;
  cfg.epsilon_scale = 0.5;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg = HvpConfig{};
  cfg.power_tol = 0.0;
  EXPECT_THROW(cfg.Validate(), Error);
}

TEST(Directional, RayleighQuotientOfQuadratic) {
  const QuadraticObjective q;
  EXPECT_NEAR(DirectionalCurvature(q, ParamVector{0.0, 0.0}, QuadraticTerm::Diagonal({2.0, 6.0}),
                                   ParamVector{1.0, 1.0}),
              4.0, 1e-8);
}

}  // namespace
}  // namespace unlearn
