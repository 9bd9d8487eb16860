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

// Acceptance suite. Each criterion prints one PASS/FAIL line with its measured
// values and runtime; the exit code is nonzero if any criterion fails.
// Usage: acceptance [output_dir]

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "symbolic.hpp"
#include "unlearn/analysis/binary.hpp"
#include "unlearn/analysis/bounds.hpp"
#include "unlearn/analysis/stats.hpp"
#include "unlearn/config.hpp"
#include "unlearn/harness.hpp"
#include "unlearn/hessian.hpp"
#include "unlearn/objectives.hpp"
#include "unlearn/unrolled.hpp"

namespace unlearn {
namespace {

using testing::CentralDifference;
using testing::MaxRelativeError;
using testing::RandomBatch;
using testing::RandomWeights;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string Fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

fs::path g_root;

fs::path RunRoot(const std::string& pass) { return g_root / pass; }

Config LoadShipped(const std::string& name) {
  return Config::Load(std::string(UNLEARN_CONFIGS_DIR) + "/" + name);
}

double MaxAbsEigen(const Matrix& h) {
  Eigen::MatrixXd m(h.rows, h.cols);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) m(i, j) = h(i, j);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().cwiseAbs().maxCoeff();
}

ParamVector Times(const Matrix& h, const ParamVector& v) {
  ParamVector out(h.rows);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) out[i] += h(i, j) * v[j];
  return out;
}

RegressionBatch RandomRegression(std::size_t rows, std::size_t dim, Rng& rng) {
  RegressionBatch b;
  b.inputs = Matrix(rows, dim);
  for (double& x : b.inputs.data) x = rng.Normal();
  for (std::size_t r = 0; r < rows; ++r) b.targets.push_back(rng.Normal());
  return b;
}

std::vector<double> Column(const CsvTable& t, const std::string& name) {
  const std::size_t c = t.Column(name);
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(ParseDouble(row.at(c), name));
  return out;
}

double Override(const ResultRow& row, const std::string& key) {
  for (const auto& [k, v] : row.overrides) {
    if (k == key) return ParseDouble(v, key);
  }
  throw Error(ErrorKind::kData, "row has no override " + key);
}

// Pipelines shared with the determinism rerun. Each writes under `root`.

Config TrajectoryConfig(long long pretrain) {
  Config cfg = LoadShipped("desk.cfg");
  cfg.Set("train.pretrain_steps", std::to_string(pretrain));
  return cfg;
}

CsvTable RunTrajectory(const Config& cfg, const fs::path& root) {
  const fs::path dir = root / RunId(cfg);
  const ResultRow row = RunCell(cfg, dir);
  Require(row.status == "ok", ErrorKind::kTraining, "trajectory run failed: " + row.error);
  return CsvTable::Parse(ReadTextFile((dir / "plots" / "trajectory.csv").string()));
}

Config SdGridConfig() {
  Config cfg = LoadShipped("desk.cfg");
  cfg.Set("data.classes", "4");
  cfg.Set("model.layers", "2,16,16,4");
  cfg.Set("train.loss", "sd");
  cfg.Set("train.pretrain_steps", "0");
  cfg.Set("experiment.sample_every", "0");
  cfg.Set("grid.train.gamma", "0,0.5,1,2");
  cfg.Set("grid.train.seed", "0,1,2");
  return cfg;
}

Config L2GridConfig() {
  Config cfg = LoadShipped("desk.cfg");
  cfg.Set("train.loss", "l2");
  cfg.Set("train.pretrain_steps", "0");
  cfg.Set("experiment.sample_every", "0");
  cfg.Set("grid.train.lambda", "0,0.001,0.01,0.1");
  cfg.Set("grid.train.seed", "0,1,2");
  return cfg;
}

// High-dimensional two-class data with mostly random labels so that a wide
// network has to memorize its training split.
Dataset MemorizationData() {
  Rng rng(2024);
  Dataset d;
  d.name = "memorize";
  const std::size_t n = 240, dim = 24;
  d.inputs = Matrix(n, dim);
  for (double& x : d.inputs.data) x = rng.Normal();
  for (std::size_t r = 0; r < n; ++r) {
    const int signal = d.inputs(r, 0) > 0 ? 1 : 0;
    d.labels.push_back(rng.Uniform() < 0.3 ? signal : static_cast<int>(rng.Below(2)));
  }
  AssignSplit(d, 7);
  return d;
}

ExperimentSpec MemorizationSpec() {
  ExperimentSpec spec;
  spec.model = ModelSpec::Mlp({24, 64, 2}, Activation::kTanh);
  spec.init_seed = 3;
  spec.train.eta = 0.2;
  spec.train.batch_size = 16;
  spec.train.pretrain_steps = 3000;
  spec.train.finetune_steps = 200;
  spec.train.sigma_every = 50;
  spec.train.seed = 5;
  return spec;
}

// ---------------------------------------------------------------------------

Outcome GradientCorrectness() {
  Rng rng(31);
  const std::array<LossKind, 4> kinds{LossKind::kCe, LossKind::kSd, LossKind::kL2, LossKind::kHce};
  const std::array<Activation, 2> acts{Activation::kTanh, Activation::kIdentity};
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t in = 1 + rng.Below(4), hidden = 2 + rng.Below(8), out = 2 + rng.Below(3);
    const ModelSpec spec = ModelSpec::Mlp({in, hidden, out}, acts[rng.Below(2)]);
    const LossSpec loss{kinds[rng.Below(4)], rng.Uniform(0, 1), rng.Uniform(0, 0.5)};
    const NetworkObjective obj(spec, loss);
    const ParamVector w = RandomWeights(spec.ParamCount(), rng);
    const Batch b = RandomBatch(1 + rng.Below(6), in, static_cast<int>(out), rng);
    const ParamVector fd = CentralDifference([&](const ParamVector& x) { return obj.Loss(x, b); }, w);
    worst = std::max(worst, MaxRelativeError(obj.Gradient(w, b), fd));
  }
  return {worst <= 1e-5, Fmt("max_rel_err=%.3e over 50 triples", worst)};
}

Outcome HvpAndSigma() {
  Rng rng(32);
  double worst_hvp = 0.0, worst_sigma = 0.0;
  int models = 0;
  while (models < 10) {
    const std::size_t in = 1 + rng.Below(4), hidden = 2 + rng.Below(6), out = 2 + rng.Below(2);
    const ModelSpec spec = ModelSpec::Mlp({in, hidden, out}, Activation::kTanh);
    if (spec.ParamCount() > 50) continue;
    ++models;
    const NetworkObjective obj(spec, LossSpec{});
    const ParamVector w = RandomWeights(spec.ParamCount(), rng);
    const Batch b = RandomBatch(8, in, static_cast<int>(out), rng);
    const DenseHessian dense = DenseHessianOf(obj, w, b);
    for (int k = 0; k < 3; ++k) {
      const ParamVector v = RandomWeights(w.size(), rng, 1.0);
      const ParamVector ref = Times(dense.values, v);
      worst_hvp = std::max(worst_hvp, Distance(Hvp(obj, w, b, v), ref) / Norm2(ref));
    }
    HvpConfig cfg;
    cfg.power_iters_max = 1000;
    cfg.power_tol = 1e-10;
    const double ref = MaxAbsEigen(dense.values);
    worst_sigma = std::max(worst_sigma, std::abs(TopSingularValue(obj, w, b, cfg).value - ref) / ref);
  }
  return {worst_hvp <= 1e-3 && worst_sigma <= 1e-3,
          Fmt("hvp_rel=%.3e sigma_rel=%.3e over %d models", worst_hvp, worst_sigma, models)};
}

Outcome QuadraticExactness() {
  Rng rng(33);
  const LeastSquaresObjective obj;
  double worst_ratio = 0.0;
  for (int t = 1; t <= 20; ++t) {
    std::vector<RegressionBatch> batches;
    for (int i = 0; i < t; ++i) batches.push_back(RandomRegression(4, 3, rng));
    const ParamVector w0{rng.Normal(), rng.Normal(), rng.Normal()};
    const UnrollResult r = UnrollPredict<LeastSquaresObjective>(obj, w0, batches, 0.05);
    worst_ratio = std::max(worst_ratio, r.residual_vs_sgd / (1e-8 * (1.0 + Norm2(w0))));
  }
  return {worst_ratio <= 1.0, Fmt("worst residual / tolerance = %.3e (t=1..20)", worst_ratio)};
}

Outcome SingleStepExactness() {
  const Config cfg = LoadShipped("t1_fixture.cfg");
  const PairedResult r = RunPairedExperiment(SpecFromConfig(cfg), LoadDataset(cfg));
  return {r.v <= 1e-10 && r.e == 0.0, Fmt("e=%g v=%.3e", r.e, r.v)};
}

Outcome TermCounting() {
  std::string detail;
  bool ok = true;
  for (int t = 2; t <= 6; ++t) {
    for (int i = 0; i < t; ++i) {
      const long long sym = testing::SymbolicCount(t, i);
      ok = ok && sym == t - 1 && CountTermsWithTarget(t, i) == sym;
    }
    detail += Fmt("t=%d:%lld ", t, testing::SymbolicCount(t, 0));
  }
  return {ok, detail};
}

Outcome ErrorGrowsWithSteps() {
  const CsvTable traj = RunTrajectory(TrajectoryConfig(0), RunRoot("first"));
  const double rho = analysis::Spearman(Column(traj, "steps"), Column(traj, "e"));
  return {rho >= 0.95, Fmt("spearman(step,e)=%.4f over %zu samples", rho, traj.rows.size())};
}

Outcome ErrorTracksVerification() {
  const CsvTable traj = RunTrajectory(TrajectoryConfig(100), RunRoot("first"));
  const double r = analysis::Pearson(Column(traj, "e"), Column(traj, "v"));
  return {r >= 0.8, Fmt("pearson(e,v)=%.4f over %zu samples", r, traj.rows.size())};
}

Outcome SdLossEffect() {
  const PlanOutcome plan =
      RunPlan(ExperimentPlan::FromConfig(SdGridConfig(), RunRoot("first") / "sd_grid", 4));
  std::vector<double> gamma, dw, e, v;
  for (const ResultRow& row : plan.rows) {
    if (row.status != "ok") return {false, "cell " + row.run_id + " failed: " + row.error};
    gamma.push_back(Override(row, "train.gamma"));
    dw.push_back(row.delta_w_norm);
    e.push_back(row.e);
    v.push_back(row.v);
  }
  const double rho = analysis::Spearman(gamma, dw);
  const double r = analysis::Pearson(e, v);
  return {rho <= -0.8 && r >= 0.7,
          Fmt("spearman(gamma,dw)=%.4f pearson(e,v)=%.4f over %zu runs", rho, r, plan.rows.size())};
}

Outcome L2Strawman() {
  const fs::path out = RunRoot("first") / "l2_grid";
  const PlanOutcome plan = RunPlan(ExperimentPlan::FromConfig(L2GridConfig(), out, 4));
  std::map<double, std::pair<double, double>> sums;
  for (const ResultRow& row : plan.rows) {
    if (row.status != "ok") return {false, "cell " + row.run_id + " failed: " + row.error};
    auto& s = sums[Override(row, "train.lambda")];
    s.first += row.e / 3.0;
    s.second += row.v / 3.0;
  }
  std::string table;
  for (const auto& [lambda, ev] : sums) {
    table += Fmt(" lambda=%g:e=%.3e,v=%.3e", lambda, ev.first, ev.second);
  }
  const bool emitted = fs::exists(out / "results.csv") &&
                       CsvTable::Parse(ReadTextFile((out / "results.csv").string())).rows.size() == 12;
  return {emitted && plan.failed == 0, "12 runs," + table};
}

Outcome TheoremChecks() {
  Rng rng(34);
  int scenarios = 0, failures = 0;
  double min_margin = INFINITY;
  for (std::size_t n : {2u, 3u}) {
    for (double sigma : {0.05, 0.1, 0.5}) {
      for (std::size_t dim : {1u, 2u}) {
        analysis::BoundScenario scn;
        scn.points.inputs = Matrix(n, dim);
        for (double& x : scn.points.inputs.data) x = rng.Uniform(-1, 1);
        for (std::size_t r = 0; r < n; ++r) scn.points.targets.push_back(rng.Uniform(-2, 2));
        scn.w0 = ParamVector(dim);
        for (double& w : scn.w0) w = rng.Uniform(-0.5, 0.5);
        scn.noise_sigma = sigma;
        scn.eta = 0.1;
        scn.grid.points_2d = 201;
        const analysis::DensityBoundReport density = analysis::CheckDensityBound(scn);
        const analysis::UnlearnBoundReport unl =
            analysis::CheckUnlearnBound(scn, analysis::SingleGradientRule(scn));
        const analysis::ReverseReport rev = analysis::CheckReverseBound(scn);
        ++scenarios;
        if (!(density.bound_holds && unl.bound_holds && unl.improves_on_d && rev.holds)) ++failures;
        min_margin = std::min(min_margin, unl.d - unl.v);
      }
    }
  }
  return {scenarios >= 12 && failures == 0,
          Fmt("%d scenarios, %d failing, min(d - v)=%.3e", scenarios, failures, min_margin)};
}

Outcome LagrangianMinimality() {
  Rng rng(35);
  double worst_gap = INFINITY, worst_residual = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const std::size_t dim = 1 + rng.Below(6);
    ParamVector x(dim);
    for (double& v : x) v = rng.Normal();
    const double eps = rng.Uniform(-1, 1);
    const analysis::LagrangianSolution best = analysis::MinWeightChange(x, eps);
    worst_residual = std::max(worst_residual, best.constraint_residual);
    ParamVector u1(dim), u2(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      u1[i] = rng.Normal();
      u2[i] = rng.Normal();
    }
    u1.Axpy((eps - Dot(u1 - u2, x)) / Dot(x, x), x);
    worst_gap = std::min(worst_gap, Dot(u1, u1) + Dot(u2, u2) - best.squared_norm);
  }
  return {worst_gap >= -1e-9 && worst_residual <= 1e-9,
          Fmt("min(feasible - analytic)=%.3e residual=%.3e", worst_gap, worst_residual)};
}

Outcome PrsSanity() {
  const Dataset data = MemorizationData();
  const ExperimentSpec spec = MemorizationSpec();
  const PairedResult run = RunPairedExperiment(spec, data);
  const PrsSummary s = RunPrs(spec, data, run, 20, 1.0);
  const double gap = s.member_mean - s.nonmember_mean;
  const bool in_range = s.min_score >= 0.0 && s.max_score <= 1.0;
  return {gap >= 0.05 && in_range,
          Fmt("member=%.4f nonmember=%.4f gap=%.4f range=[%.4f,%.4f] target before=%.6f "
              "after=%.6f retrained=%.6f delta=%+.3e",
              s.member_mean, s.nonmember_mean, gap, s.min_score, s.max_score, s.target_before,
              s.target_after, s.target_retrained, s.target_after - s.target_before)};
}

Outcome SisaArithmetic() {
  const double b = analysis::SisaBreakeven(100000);
  return {std::abs(b - 157.11) <= 0.01, Fmt("breakeven(100000)=%.4f", b)};
}

// Compares every file under two trees byte for byte.
bool SameTree(const fs::path& a, const fs::path& b, std::size_t& files, std::string& first_diff) {
  std::vector<fs::path> rel;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
  }
  std::size_t other = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) other += e.is_regular_file();
  if (other != rel.size()) {
    first_diff = "file count differs";
    return false;
  }
  files = rel.size();
  for (const fs::path& p : rel) {
    if (!fs::exists(b / p) || ReadTextFile((a / p).string()) != ReadTextFile((b / p).string())) {
      first_diff = p.string();
      return false;
    }
  }
  return true;
}

Outcome Determinism() {
  const fs::path second = RunRoot("second");
  RunTrajectory(TrajectoryConfig(0), second);
  RunTrajectory(TrajectoryConfig(100), second);
  RunPlan(ExperimentPlan::FromConfig(SdGridConfig(), second / "sd_grid", 2));
  RunPlan(ExperimentPlan::FromConfig(L2GridConfig(), second / "l2_grid", 1));
  std::size_t files = 0;
  std::string diff;
  const bool same = SameTree(RunRoot("first"), second, files, diff);
  return {same, same ? Fmt("%zu files identical", files) : "mismatch at " + diff};
}

}  // namespace
}  // namespace unlearn

int main(int argc, char** argv) {
  using namespace unlearn;
  g_root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sgd_unlearn_acceptance";
  fs::remove_all(g_root);
  fs::create_directories(g_root);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 30, GradientCorrectness},
      {2, "hvp and sigma oracles", 30, HvpAndSigma},
      {3, "quadratic exactness", 10, QuadraticExactness},
      {4, "single-step exactness", 5, SingleStepExactness},
      {5, "term counting", 5, TermCounting},
      {6, "e grows with t", 60, ErrorGrowsWithSteps},
      {7, "e-v correlation over t", 180, ErrorTracksVerification},
      {8, "sd loss effect", 300, SdLossEffect},
      {9, "l2 strawman completes", 180, L2Strawman},
      {10, "bound checks", 120, TheoremChecks},
      {11, "lagrangian minimality", 30, LagrangianMinimality},
      {12, "prs sanity", 120, PrsSanity},
      {13, "sisa arithmetic", 1, SisaArithmetic},
  };

  int failed = 0;
  double cumulative = 0.0;
  const auto report = [&](int id, const std::string& name, double budget, const Outcome& o,
                          double secs) {
    const bool pass = o.pass && secs < budget;
    failed += !pass;
    std::printf("%s [%2d] %-24s %s (%.2fs / %.0fs)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), secs, budget);
    std::fflush(stdout);
  };
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.id >= 6 && c.id <= 9) cumulative += secs;
    report(c.id, c.name, c.budget_seconds, o, secs);
  }
  {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = Determinism();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // The rerun may not take longer than the original pipelines plus slack.
    report(14, "determinism", cumulative + 5.0, o, secs);
  }
  std::printf("%s: %d of 14 criteria failed\n", failed ? "FAILED" : "OK", failed);
  return failed ? 1 : 0;
}
