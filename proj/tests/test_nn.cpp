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

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/objectives.hpp"

namespace unlearn {
namespace {

using testing::CentralDifference;
using testing::MaxRelativeError;
using testing::RandomBatch;
using testing::RandomWeights;

Batch OneRow(std::vector<double> x, int label) {
  Batch b;
  const std::size_t width = x.size();
  b.inputs = Matrix(1, width, std::move(x));
  b.labels = {label};
  return b;
}

Model Linear2x2(std::vector<double> w) {
  return Model{ModelSpec::Mlp({2, 2}, Activation::kIdentity), ParamVector(std::move(w))};
}

TEST(Forward, IdentityWeightsReturnInput) {
  const Matrix z = Forward(Linear2x2({1, 0, 0, 1, 0, 0}), OneRow({1, 2}, 0));
  EXPECT_EQ(z.data, (std::vector<double>{1, 2}));
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  const ModelSpec spec = ModelSpec::Mlp({3, 5, 4}, Activation::kTanh);
  Rng rng(4);
  const Matrix z = Forward(Model{spec, ParamVector(spec.ParamCount())}, RandomBatch(6, 3, 4, rng));
  for (double v : z.data) EXPECT_EQ(v, 0.0);
}

TEST(Forward, HandMultiply) {
  const Matrix z = Forward(Linear2x2({1, 0, 0, -1, 0, 0}), OneRow({3, 4}, 0));
  EXPECT_EQ(z.data, (std::vector<double>{3, -4}));
}

TEST(Forward, WidthMismatchIsShapeError) {
  try {
    Forward(Linear2x2({1, 0, 0, 1, 0, 0}), OneRow({1, 2, 3}, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(ModelSpecTest, ValidationAndCounts) {
  EXPECT_EQ(ModelSpec::Mlp({2, 16, 16, 2}, Activation::kTanh).ParamCount(),
            2u * 16 + 16 + 16 * 16 + 16 + 16 * 2 + 2);
  EXPECT_THROW(ModelSpec::Mlp({2, 1}, Activation::kTanh).Validate(), Error);
  EXPECT_THROW(ModelSpec::Mlp({2}, Activation::kTanh).Validate(), Error);
  EXPECT_EQ(ParseActivation("relu"), Activation::kRelu);
  EXPECT_THROW(ParseActivation("sigmoid"), Error);
}

TEST(Loss, UniformPredictionIsLn2) {
  EXPECT_NEAR(Loss(Linear2x2({0, 0, 0, 0, 0, 0}), OneRow({1, 1}, 1), LossSpec{}),
              std::numbers::ln2, 1e-15);
}

TEST(Loss, SdPenaltyVanishesForEqualLogits) {
  const Model m = Linear2x2({0, 0, 0, 0, 0.3, 0.3});
  const Batch b = OneRow({2, -1}, 0);
  const double ce = Loss(m, b, LossSpec{});
  for (double gamma : {0.5, 2.0, 50.0}) {
    EXPECT_NEAR(Loss(m, b, LossSpec{LossKind::kSd, gamma, 0.0}), ce, 1e-15);
  }
}

TEST(Loss, SdPenaltyHandValue) {
  // logits (1, 0): population std 0.5, times gamma 2.
  const Model m = Linear2x2({0, 0, 0, 0, 1, 0});
  const Batch b = OneRow({5, 5}, 0);
  EXPECT_NEAR(Loss(m, b, LossSpec{LossKind::kSd, 2.0, 0.0}) - Loss(m, b, LossSpec{}), 1.0, 1e-14);
}

TEST(Loss, L2AddsWeightNorm) {
  const Model m = Linear2x2({3, 0, 0, 4, 0, 0});
  const Batch b = OneRow({1, 1}, 0);
  EXPECT_NEAR(Loss(m, b, LossSpec{LossKind::kL2, 0.0, 0.5}) - Loss(m, b, LossSpec{}), 2.5, 1e-14);
}

TEST(Loss, HcePenaltyHandValue) {
  // p = (0.5, 0.5): p(1-p) = (0.25, 0.25), norm 0.25*sqrt(2).
  const Model m = Linear2x2({0, 0, 0, 0, 0, 0});
  const Batch b = OneRow({1, 1}, 0);
  EXPECT_NEAR(Loss(m, b, LossSpec{LossKind::kHce, 0.0, 2.0}) - Loss(m, b, LossSpec{}),
              2.0 * 0.25 * std::sqrt(2.0), 1e-14);
}

TEST(Loss, CeIgnoresGammaAndLambda) {
  Rng rng(1);
  const ModelSpec spec = ModelSpec::Mlp({3, 4, 3}, Activation::kTanh);
  const Model m{spec, RandomWeights(spec.ParamCount(), rng)};
  const Batch b = RandomBatch(5, 3, 3, rng);
  EXPECT_EQ(Loss(m, b, LossSpec{LossKind::kCe, 3.0, 4.0}), Loss(m, b, LossSpec{}));
}

TEST(Loss, LabelOutOfRangeIsLabelError) {
  try {
    Loss(Linear2x2({1, 0, 0, 1, 0, 0}), OneRow({1, 2}, 2), LossSpec{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLabel);
  }
}

TEST(Loss, NegativeStrengthRejected) {
  EXPECT_THROW((LossSpec{LossKind::kSd, -1.0, 0.0}.Validate()), Error);
}

TEST(Loss, CeNonnegativeOnRandomInputs) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const ModelSpec spec = ModelSpec::Mlp({3, 6, 4}, Activation::kRelu);
    const Model m{spec, RandomWeights(spec.ParamCount(), rng, 3.0)};
    EXPECT_GE(Loss(m, RandomBatch(4, 3, 4, rng), LossSpec{}), 0.0);
  }
}

TEST(Loss, SdTermZeroOnlyForConstantLogits) {
  Rng rng(3);
  const ModelSpec spec = ModelSpec::Mlp({2, 3}, Activation::kIdentity);
  for (int trial = 0; trial < 100; ++trial) {
    const Model m{spec, RandomWeights(spec.ParamCount(), rng)};
    const Batch b = RandomBatch(1, 2, 3, rng);
    const Matrix z = Forward(m, b);
    const double spread = *std::max_element(z.data.begin(), z.data.end()) -
                          *std::min_element(z.data.begin(), z.data.end());
    const double sd_term = Loss(m, b, LossSpec{LossKind::kSd, 1.0, 0.0}) - Loss(m, b, LossSpec{});
    EXPECT_EQ(sd_term > 1e-12, spread > 1e-12);
  }
}

TEST(Grad, QuadraticOneParameter) {
  const QuadraticObjective q;
  const QuadraticTerm term = QuadraticTerm::Diagonal({1.0});
  EXPECT_DOUBLE_EQ(q.Gradient(ParamVector{3.0}, term)[0], 3.0);
}

TEST(Grad, HcePenaltyGradientVanishesWhenSaturated) {
  const Model m = Linear2x2({0, 0, 0, 0, 40, -40});
  const Batch b = OneRow({0.3, -0.2}, 0);
  const ParamVector ce = Grad(m, b, LossSpec{});
  const ParamVector hce = Grad(m, b, LossSpec{LossKind::kHce, 0.0, 10.0});
  for (std::size_t i = 0; i < ce.size(); ++i) EXPECT_NEAR(hce[i], ce[i], 1e-12);
}

struct GradCase {
  Activation act;
  LossKind kind;
};

class GradCheck : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradCheck, MatchesCentralDifferences) {
  const GradCase c = GetParam();
  Rng rng(1000 + static_cast<int>(c.act) * 10 + static_cast<int>(c.kind));
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t in = 1 + rng.Below(4), hidden = 2 + rng.Below(8), out = 2 + rng.Below(3);
    const ModelSpec spec = ModelSpec::Mlp({in, hidden, out}, c.act);
    ASSERT_LE(spec.ParamCount(), 200u);
    const LossSpec loss{c.kind, 0.7, 0.3};
    const NetworkObjective obj(spec, loss);
    const ParamVector w = RandomWeights(spec.ParamCount(), rng);
    const Batch b = RandomBatch(1 + rng.Below(6), in, static_cast<int>(out), rng);
    const ParamVector fd = CentralDifference([&](const ParamVector& x) { return obj.Loss(x, b); }, w);
    EXPECT_LE(MaxRelativeError(obj.Gradient(w, b), fd), 1e-5);
  }
}

INSTANTIATE_TEST_SUITE_P(
    SmoothModels, GradCheck,
    ::testing::Values(GradCase{Activation::kTanh, LossKind::kCe},
                      GradCase{Activation::kTanh, LossKind::kSd},
                      GradCase{Activation::kTanh, LossKind::kL2},
                      GradCase{Activation::kTanh, LossKind::kHce},
                      GradCase{Activation::kIdentity, LossKind::kCe},
                      GradCase{Activation::kIdentity, LossKind::kSd},
                      GradCase{Activation::kIdentity, LossKind::kHce}));

TEST(Grad, BatchGradientIsMeanOfExampleGradients) {
  Rng rng(5);
  const ModelSpec spec = ModelSpec::Mlp({3, 5, 3}, Activation::kTanh);
  const NetworkObjective obj(spec, LossSpec{LossKind::kSd, 0.4, 0.0});
  const ParamVector w = RandomWeights(spec.ParamCount(), rng);
  const Batch b = RandomBatch(4, 3, 3, rng);
  ParamVector sum(w.size());
  for (std::size_t r = 0; r < 4; ++r) {
    sum += obj.Gradient(w, OneRow({b.inputs.row(r).begin(), b.inputs.row(r).end()}, b.labels[r]));
  }
  const ParamVector full = obj.Gradient(w, b);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(full[i], sum[i] / 4.0, 1e-14);
}

TEST(Sgd, QuadraticSteps) {
  const QuadraticObjective q;
  const QuadraticTerm term = QuadraticTerm::Diagonal({1.0});
  const ParamVector w1 = SgdStep(q, ParamVector{1.0}, term, 0.1);
  EXPECT_NEAR(w1[0], 0.9, 1e-15);
  EXPECT_NEAR(SgdStep(q, w1, term, 0.1)[0], 0.81, 1e-15);
}

TEST(Sgd, ZeroGradientIsFixedPoint) {
  const QuadraticObjective q;
  const ParamVector w{0.0, 0.0};
  EXPECT_EQ(SgdStep(q, w, QuadraticTerm::Diagonal({2.0, 3.0}), 0.5), w);
}

TEST(Sgd, InputModelUnchanged) {
  const Model m = Linear2x2({1, 2, 3, 4, 5, 6});
  const Model copy = m;
  const Model next = SgdStep(m, OneRow({1, 1}, 1), LossSpec{}, 0.1);
  EXPECT_EQ(m.weights, copy.weights);
  EXPECT_NE(next.weights, m.weights);
}

TEST(Sgd, NonFiniteGradientIsNumericError) {
  const Model m = Linear2x2({1, 0, 0, 1, 0, 0});
  try {
    SgdStep(m, OneRow({NAN, 1}, 0), LossSpec{}, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
}

TEST(Determinism, RepeatedCallsBitIdentical) {
  Rng rng(9);
  const ModelSpec spec = ModelSpec::Mlp({4, 8, 8, 3}, Activation::kRelu);
  const Model m = InitModel(spec, 11);
  const Batch b = RandomBatch(7, 4, 3, rng);
  const LossSpec loss{LossKind::kSd, 0.5, 0.0};
  EXPECT_EQ(Forward(m, b), Forward(m, b));
  EXPECT_EQ(Grad(m, b, loss), Grad(m, b, loss));
  EXPECT_EQ(SgdStep(m, b, loss, 0.05).weights, SgdStep(m, b, loss, 0.05).weights);
  EXPECT_EQ(InitModel(spec, 11).weights, m.weights);
  EXPECT_NE(InitModel(spec, 12).weights, m.weights);
}

TEST(Init, GlorotBoundsAndZeroBias) {
  const ModelSpec spec = ModelSpec::Mlp({2, 16, 2}, Activation::kTanh);
  const ParamVector w = InitModel(spec, 3).weights;
  const double s1 = std::sqrt(6.0 / 18.0);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_LE(std::abs(w[i]), s1);
  for (std::size_t i = 32; i < 48; ++i) EXPECT_EQ(w[i], 0.0);
}

TEST(Softmax, StableForLargeLogits) {
  const std::vector<double> z{1000.0, 1000.0};
  const std::vector<double> p = Softmax(z);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

}  // namespace
}  // namespace unlearn
