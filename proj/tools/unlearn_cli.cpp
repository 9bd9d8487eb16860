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

// Command-line driver: train | unlearn | verify | correlate | bounds |
// landscape | prs | plan.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "unlearn/analysis/binary.hpp"
#include "unlearn/analysis/bounds.hpp"
#include "unlearn/config.hpp"
#include "unlearn/harness.hpp"

namespace fs = std::filesystem;
using namespace unlearn;

namespace {

struct Common {
  std::string config_path;
  std::string out = "runs";
  long long seed = -1;
  int workers = 1;
  std::vector<std::string> overrides;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "overrides train.seed");
  cmd->add_option("--workers", c.workers, "parallel plan cells");
  cmd->add_option("--set", c.overrides, "KEY=VALUE override (repeatable)");
}

Config BuildConfig(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : Config::Load(c.config_path);
  for (const std::string& o : c.overrides) cfg.SetAssignment(o);
  if (c.seed >= 0) cfg.Set("train.seed", std::to_string(c.seed));
  return cfg;
}

std::vector<double> ParseList(const std::string& text) {
  std::vector<double> out;
  for (const std::string& part : SplitString(text, ',')) out.push_back(ParseDouble(part, "list"));
  return out;
}

void PrintJson(const Json& j) { std::cout << j.dump() << "\n"; }

int CmdTrain(const Common& c) {
  const Config cfg = BuildConfig(c);
  ExperimentSpec spec = SpecFromConfig(cfg);
  const Dataset data = LoadDataset(cfg);
  const TrainOutcome trained = Train(InitModel(spec.model, spec.init_seed), data, spec.train);
  const fs::path dir = fs::path(c.out) / RunId(cfg);
  const StepRecord& last = trained.log.records.back();
  Json summary = {{"record", "train"}, {"run_id", RunId(cfg)},
                  {"final_loss", last.loss}, {"final_accuracy", last.accuracy},
                  {"delta_w_norm", last.delta_w_norm},
                  {"sigma_samples", trained.log.sigma_samples.size()}};
  WriteRunArtifacts(dir, cfg, trained.log, {summary});
  summary["dir"] = dir.string();
  PrintJson(summary);
  return 0;
}

int CmdUnlearn(const Common& c, const std::string& run_dir) {
  Require(!run_dir.empty(), ErrorKind::kArgument, "--run DIR is required");
  const fs::path dir(run_dir);
  Config cfg = Config::Load((dir / "config.txt").string());
  for (const std::string& o : c.overrides) cfg.SetAssignment(o);
  const ExperimentSpec spec = SpecFromConfig(cfg);
  const Dataset data = LoadDataset(cfg);
  const TrainConfig& t = spec.train;
  const long long n = t.pretrain_steps;
  const auto ckpt = [&](const std::string& name) {
    return ReadCheckpoint((dir / "checkpoints" / name).string());
  };
  const ParamVector w_final = ckpt("step_" + std::to_string(n + t.finetune_steps) + ".uwgt");

  ParamVector w_unlearned;
  if (spec.request.method == UnlearnMethod::kSingleGradient) {
    const Schedule schedule = BuildSchedule(data, t);
    const Endpoints ends{n, n + t.finetune_steps, ckpt("step_" + std::to_string(n) + ".uwgt"),
                         w_final};
    const SingleGradientParams p{t.eta, t.epochs_over_target, t.batch_size,
                                 spec.request.gradient_point, TargetGranularity::kWholeBatch};
    w_unlearned = SingleGradientUnlearn(ends, NetworkObjective(spec.model, t.loss),
                                        MakeBatch(data, schedule.target_rows), p);
  } else {
    Require(t.log_updates, ErrorKind::kState,
            "amnesiac unlearning needs a run trained with train.log_updates=true");
    w_unlearned = w_final;
    std::size_t applied = 0;
    for (const auto& entry : fs::directory_iterator(dir / "checkpoints")) {
      if (entry.path().filename().string().starts_with("update_")) {
        w_unlearned -= ReadCheckpoint(entry.path().string());
        ++applied;
      }
    }
    if (applied == 0) std::cerr << "warning: no target updates were logged\n";
  }
  WriteCheckpoint((dir / "checkpoints" / "unlearned.uwgt").string(), w_unlearned);
  PrintJson({{"record", "unlearn"},
             {"method", std::string(UnlearnMethodName(spec.request.method))},
             {"change_norm", Distance(w_unlearned, w_final)},
             {"checkpoint", (dir / "checkpoints" / "unlearned.uwgt").string()}});
  return 0;
}

int CmdVerify(const Common& c, bool with_prs) {
  Config cfg = BuildConfig(c);
  if (with_prs) cfg.Set("prs.enabled", "true");
  const fs::path dir = fs::path(c.out) / RunId(cfg);
  const ResultRow row = RunCell(cfg, dir);
  std::cout << "e=" << FormatDouble(row.e) << " v=" << FormatDouble(row.v)
            << " accuracy=" << FormatDouble(row.accuracy) << "\n";
  if (row.prs) {
    std::cout << "prs member=" << FormatDouble(row.prs->member_mean)
              << " nonmember=" << FormatDouble(row.prs->nonmember_mean)
              << " target_before=" << FormatDouble(row.prs->target_before)
              << " target_after=" << FormatDouble(row.prs->target_after)
              << " target_retrained=" << FormatDouble(row.prs->target_retrained) << "\n";
  }
  PrintJson(RowJson(row));
  return 0;
}

int CmdCorrelate(const Common& c, const std::string& table, const std::string& x,
                 const std::string& y) {
  const CsvTable t = CsvTable::Parse(ReadTextFile(table));
  const Correlation r = CorrelateResults(t, x, y, fs::path(c.out));
  PrintJson({{"record", "correlation"}, {"x", x}, {"y", y}, {"rows", r.rows},
             {"pearson", r.pearson}, {"spearman", r.spearman}});
  return 0;
}

int CmdBounds(double sigma, double eta) {
  analysis::BoundScenario scn = analysis::DefaultScenario();
  if (sigma > 0) scn.noise_sigma = sigma;
  if (eta > 0) scn.eta = eta;
  const auto density = analysis::CheckDensityBound(scn);
  const auto unl = analysis::CheckUnlearnBound(scn, analysis::SingleGradientRule(scn));
  const auto rev = analysis::CheckReverseBound(scn);
  std::cout << "bound_holds=" << (density.bound_holds ? "true" : "false") << "\n";
  PrintJson({{"record", "density_bound"}, {"sup_diff", density.sup_diff}, {"lipschitz", density.lipschitz},
             {"d", density.d}, {"bound_holds", density.bound_holds}, {"slack", density.slack}});
  PrintJson({{"record", "unlearn_bound"}, {"sup_diff", unl.sup_diff}, {"lipschitz", unl.lipschitz},
             {"v", unl.v}, {"d", unl.d}, {"bound_holds", unl.bound_holds},
             {"improves_on_d", unl.improves_on_d}, {"slack", unl.slack}});
  PrintJson({{"record", "reverse"}, {"v", rev.v}, {"b_sup", rev.b_sup}, {"a_mass", rev.a_mass},
             {"holds", rev.holds}, {"slack", rev.slack}});
  return density.bound_holds && unl.bound_holds && rev.holds ? 0 : 1;
}

int CmdLandscape(const Common& c, const std::string& gammas, double lo, double hi, int resolution) {
  fs::create_directories(c.out);
  for (double g : ParseList(gammas)) {
    const analysis::Landscape land = analysis::LandscapeGrid(g, lo, hi, lo, hi, resolution);
    CsvWriter csv({"a", "b", "loss", "ga", "gb"});
    for (const analysis::LandscapeRow& r : land.rows) {
      csv.Cell(r.a).Cell(r.b).Cell(r.loss).Cell(r.neg_grad_a).Cell(r.neg_grad_b);
      csv.EndRow();
    }
    const fs::path path = fs::path(c.out) / ("landscape_gamma_" + FormatDouble(g) + ".csv");
    WriteTextFile(path.string(), csv.str());
    Json rec = {{"record", "landscape"}, {"gamma", g}, {"path", path.string()},
                {"rows", land.rows.size()}};
    rec["flip_offset"] = land.flip_offset ? Json(*land.flip_offset) : Json(nullptr);
    PrintJson(rec);
  }
  return 0;
}

int CmdPlan(const Common& c) {
  const Config cfg = BuildConfig(c);
  const ExperimentPlan plan = ExperimentPlan::FromConfig(cfg, c.out, c.workers);
  const PlanOutcome out = RunPlan(plan);
  PrintJson({{"record", "plan"}, {"cells", out.rows.size()}, {"computed", out.computed},
             {"cached", out.cached}, {"failed", out.failed},
             {"results", (fs::path(c.out) / "results.csv").string()}});
  return 0;
}

void ReportError(std::string_view kind, std::string_view message) {
  std::cerr << Json({{"error", kind}, {"message", message}}).dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGD-unrolling approximate unlearning toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* train = app.add_subcommand("train", "train and write a run directory");
  AddCommon(train, common);
  std::string run_dir;
  auto* unlearn = app.add_subcommand("unlearn", "unlearn the target batch of a trained run");
  AddCommon(unlearn, common);
  unlearn->add_option("--run", run_dir, "run directory written by train");
  auto* verify = app.add_subcommand("verify", "paired experiment: e and v against retraining");
  AddCommon(verify, common);
  std::string table, xcol = "e", ycol = "v";
  auto* correlate = app.add_subcommand("correlate", "pearson/spearman between two columns");
  AddCommon(correlate, common);
  correlate->add_option("--table", table, "results CSV")->required();
  correlate->add_option("--x", xcol, "x column");
  correlate->add_option("--y", ycol, "y column");
  double sigma = 0, eta = 0;
  auto* bounds = app.add_subcommand("bounds", "distribution bound checks on a small scenario");
  bounds->add_option("--sigma", sigma, "noise std");
  bounds->add_option("--eta", eta, "learning rate");
  std::string gammas = "0,0.5,1,2";
  double lo = -4, hi = 4;
  int resolution = 41;
  auto* landscape = app.add_subcommand("landscape", "binary SD-loss grids as CSV");
  AddCommon(landscape, common);
  landscape->add_option("--gamma", gammas, "comma-separated gamma values");
  landscape->add_option("--lo", lo, "grid lower bound for a and b");
  landscape->add_option("--hi", hi, "grid upper bound for a and b");
  landscape->add_option("--resolution", resolution, "points per axis");
  auto* prs = app.add_subcommand("prs", "paired experiment with privacy risk scores");
  AddCommon(prs, common);
  auto* plan = app.add_subcommand("plan", "run every cell of a grid.* sweep");
  AddCommon(plan, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    ReportError("argument", e.what());
    return 2;
  }

  try {
    if (*train) return CmdTrain(common);
    if (*unlearn) return CmdUnlearn(common, run_dir);
    if (*verify) return CmdVerify(common, false);
    if (*correlate) return CmdCorrelate(common, table, xcol, ycol);
    if (*bounds) return CmdBounds(sigma, eta);
    if (*landscape) return CmdLandscape(common, gammas, lo, hi, resolution);
    if (*prs) return CmdVerify(common, true);
    if (*plan) return CmdPlan(common);
  } catch (const Error& e) {
    ReportError(ErrorKindName(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    ReportError("internal", e.what());
    return 1;
  }
  return 0;
}
