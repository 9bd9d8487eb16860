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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "unlearn/analysis/prs.hpp"
#include "unlearn/analysis/stats.hpp"
#include "unlearn/config.hpp"
#include "unlearn/data.hpp"
#include "unlearn/error.hpp"
#include "unlearn/io.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/text.hpp"
#include "unlearn/unlearn.hpp"

namespace unlearn {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Membership inference (privacy risk score) around a paired experiment.
// ---------------------------------------------------------------------------

struct PrsSummary {
  double member_mean = 0.0;     // target model on its training split
  double nonmember_mean = 0.0;  // target model on the attacker-unseen test half
  double target_before = 0.0;   // unlearned batch, original model
  double target_after = 0.0;    // unlearned batch, unlearned model
  double target_retrained = 0.0;
  double min_score = 1.0;
  double max_score = 0.0;
};

namespace detail {

inline std::vector<double> EntropyScores(const NetworkObjective& objective, const ParamVector& w,
                                         const Batch& batch) {
  const Matrix logits = objective.Forward(w, batch);
  std::vector<double> out(logits.rows);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    out[r] = analysis::ModifiedEntropy(Softmax(logits.row(r)), batch.labels[r]);
  }
  return out;
}

inline analysis::ScoresByLabel GroupByLabel(const std::vector<double>& scores,
                                            const std::vector<int>& labels) {
  analysis::ScoresByLabel out;
  for (std::size_t i = 0; i < scores.size(); ++i) out[labels[i]].push_back(scores[i]);
  return out;
}

}  // namespace detail

/// Fits the attack on a shadow model trained only on half of the training
/// split (non-members: half of the test split), then scores the models of a
/// finished paired experiment.
inline PrsSummary RunPrs(const ExperimentSpec& spec, const Dataset& data, const PairedResult& run,
                         int bins, double smoothing) {
  Require(data.train.size() >= 4 && data.test.size() >= 4, ErrorKind::kData,
          "PRS needs at least 4 training and 4 test examples");
  Rng rng(spec.train.seed ^ 0xA5A5A5A5ULL);
  std::vector<std::size_t> train = data.train;
  std::vector<std::size_t> test = data.test;
  rng.Shuffle(std::span<std::size_t>(train));
  rng.Shuffle(std::span<std::size_t>(test));
  const std::vector<std::size_t> shadow_in(train.begin(), train.begin() + train.size() / 2);
  const std::vector<std::size_t> shadow_out(test.begin(), test.begin() + test.size() / 2);
  const std::vector<std::size_t> target_out(test.begin() + test.size() / 2, test.end());

  const NetworkObjective objective(spec.model, spec.train.loss);
  ParamVector shadow = InitModel(spec.model, spec.init_seed + 7919).weights;
  detail::BatchStream stream(shadow_in, std::min(spec.train.batch_size, shadow_in.size()),
                             spec.train.seed + 104729);
  const long long steps = spec.train.pretrain_steps + spec.train.finetune_steps;
  for (long long i = 0; i < steps; ++i) {
    shadow = SgdStep(objective, shadow, MakeBatch(data, stream.Next()), spec.train.eta);
  }

  const Batch in_batch = MakeBatch(data, shadow_in);
  const Batch out_batch = MakeBatch(data, shadow_out);
  const analysis::PrsModel attack = analysis::PrsFit(
      detail::GroupByLabel(detail::EntropyScores(objective, shadow, in_batch), in_batch.labels),
      detail::GroupByLabel(detail::EntropyScores(objective, shadow, out_batch), out_batch.labels),
      bins, smoothing);

  PrsSummary s;
  const auto mean_prs = [&](const ParamVector& w, const Batch& batch) {
    const std::vector<double> scores = detail::EntropyScores(objective, w, batch);
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double p = analysis::PrsScore(attack, scores[i], batch.labels[i]);
      s.min_score = std::min(s.min_score, p);
      s.max_score = std::max(s.max_score, p);
      sum += p;
    }
    return sum / static_cast<double>(scores.size());
  };
  s.member_mean = mean_prs(run.w_final, MakeBatch(data, data.train));
  s.nonmember_mean = mean_prs(run.w_final, MakeBatch(data, target_out));
  const Batch target = MakeBatch(data, BuildSchedule(data, [&] {
                                          TrainConfig c = spec.train;
                                          c.target_batch = spec.request.target_batch_index;
                                          return c;
                                        }()).target_rows);
  s.target_before = mean_prs(run.w_final, target);
  s.target_after = mean_prs(run.w_unlearned, target);
  s.target_retrained = mean_prs(run.w_retrained, target);
  return s;
}

// ---------------------------------------------------------------------------
// Run artifacts.
// ---------------------------------------------------------------------------

inline Json TrajectoryJson(const std::vector<TrajectoryPoint>& points) {
  Json arr = Json::array();
  for (const TrajectoryPoint& p : points) {
    arr.push_back({{"steps", p.steps}, {"e", p.e}, {"v", p.v},
                   {"delta_w_norm", p.delta_w_norm}, {"sigma_avg", p.sigma_avg}});
  }
  return arr;
}

inline std::string TrajectoryCsv(const std::vector<TrajectoryPoint>& points) {
  CsvWriter csv({"steps", "e", "v", "delta_w_norm", "sigma_avg"});
  for (const TrajectoryPoint& p : points) {
    csv.Cell(p.steps).Cell(p.e).Cell(p.v).Cell(p.delta_w_norm).Cell(p.sigma_avg);
    csv.EndRow();
  }
  return csv.str();
}

/// <dir>/{config.txt, runlog.csv, checkpoints/, report.jsonl, plots/}
inline void WriteRunArtifacts(const fs::path& dir, const Config& cfg, const RunLog& log,
                              const std::vector<Json>& report_lines) {
  fs::create_directories(dir / "checkpoints");
  fs::create_directories(dir / "plots");
  WriteTextFile((dir / "config.txt").string(), cfg.Canonical());
  WriteTextFile((dir / "runlog.csv").string(), RunLogCsv(log));
  for (const auto& [step, w] : log.checkpoints) {
    if (step != log.initial_step() && step != log.final_step()) continue;
    WriteCheckpoint((dir / "checkpoints" / ("step_" + std::to_string(step) + ".uwgt")).string(), w);
  }
  for (const TargetUpdate& u : log.target_updates) {
    WriteCheckpoint((dir / "checkpoints" / ("update_" + std::to_string(u.step) + ".uwgt")).string(),
                    u.update);
  }
  std::string jsonl;
  for (const Json& line : report_lines) jsonl += line.dump() + "\n";
  WriteTextFile((dir / "report.jsonl").string(), jsonl);
}

// ---------------------------------------------------------------------------
// Scatter plots.
// ---------------------------------------------------------------------------

inline std::string XmlEscape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Minimal standalone SVG: axes, one circle per point, caption.
inline std::string ScatterSvg(const std::vector<double>& xs, const std::vector<double>& ys,
                              std::string_view x_label, std::string_view y_label,
                              std::string_view caption) {
  constexpr double kW = 480, kH = 360, kMargin = 50;
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  const double xmin = xs.empty() ? 0 : *xmin_it, xmax = xs.empty() ? 1 : *xmax_it;
  const double ymin = ys.empty() ? 0 : *ymin_it, ymax = ys.empty() ? 1 : *ymax_it;
  const double xspan = xmax > xmin ? xmax - xmin : 1.0;
  const double yspan = ymax > ymin ? ymax - ymin : 1.0;
  const auto px = [&](double x) { return kMargin + (x - xmin) / xspan * (kW - 2 * kMargin); };
  const auto py = [&](double y) { return kH - kMargin - (y - ymin) / yspan * (kH - 2 * kMargin); };

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"360\" viewBox=\"0 0 480 360\">\n";
  svg += "<g id=\"axes\" stroke=\"black\">\n";
  svg += "<line x1=\"50\" y1=\"310\" x2=\"430\" y2=\"310\"/>\n";
  svg += "<line x1=\"50\" y1=\"310\" x2=\"50\" y2=\"50\"/>\n";
  svg += "</g>\n";
  svg += "<text x=\"240\" y=\"340\" text-anchor=\"middle\">" + XmlEscape(x_label) + "</text>\n";
  svg += "<text x=\"15\" y=\"180\" transform=\"rotate(-90 15 180)\" text-anchor=\"middle\">" +
         XmlEscape(y_label) + "</text>\n";
  svg += "<text x=\"240\" y=\"25\" text-anchor=\"middle\">" + XmlEscape(caption) + "</text>\n";
  svg += "<g id=\"points\" fill=\"steelblue\">\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    svg += "<circle cx=\"" + FormatDouble(px(xs[i])) + "\" cy=\"" + FormatDouble(py(ys[i])) +
           "\" r=\"3\"/>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// Result tables and correlation.
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t Column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) Fail(ErrorKind::kData, "table has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }

  static CsvTable Parse(const std::string& text) {
    CsvTable t;
    for (const std::string& line : SplitString(text, '\n')) {
      if (Trim(line).empty()) continue;
      std::vector<std::string> fields = SplitString(line, ',');
      for (auto& f : fields) f = Trim(f);
      if (t.header.empty()) {
        t.header = std::move(fields);
      } else {
        t.rows.push_back(std::move(fields));
      }
    }
    return t;
  }
};

struct Correlation {
  double pearson = 0.0;
  double spearman = 0.0;
  std::size_t rows = 0;
};

/// Correlates two numeric columns over rows where both are finite. When
/// `out_dir` is given, writes scatter_<x>_<y>.csv and .svg there.
inline Correlation CorrelateResults(const CsvTable& table, const std::string& x_col,
                                    const std::string& y_col,
                                    const std::optional<fs::path>& out_dir = std::nullopt) {
  const std::size_t xi = table.Column(x_col);
  const std::size_t yi = table.Column(y_col);
  std::vector<double> xs, ys;
  for (const auto& row : table.rows) {
    if (xi >= row.size() || yi >= row.size()) continue;
    const auto x = TryParseDouble(row[xi]);
    const auto y = TryParseDouble(row[yi]);
    if (x && y && std::isfinite(*x) && std::isfinite(*y)) {
      xs.push_back(*x);
      ys.push_back(*y);
    }
  }
  Require(xs.size() >= 3, ErrorKind::kData,
          "need at least 3 finite rows to correlate, found " + std::to_string(xs.size()));
  Correlation c;
  c.pearson = analysis::Pearson(xs, ys);
  c.spearman = analysis::Spearman(xs, ys);
  c.rows = xs.size();
  if (out_dir) {
    fs::create_directories(*out_dir);
    CsvWriter csv({x_col, y_col});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      csv.Cell(xs[i]).Cell(ys[i]);
      csv.EndRow();
    }
    const std::string stem = "scatter_" + x_col + "_" + y_col;
    WriteTextFile((*out_dir / (stem + ".csv")).string(), csv.str());
    WriteTextFile((*out_dir / (stem + ".svg")).string(),
                  ScatterSvg(xs, ys, x_col, y_col,
                             "pearson=" + FormatDouble(c.pearson) +
                                 " spearman=" + FormatDouble(c.spearman)));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Experiment plans.
// ---------------------------------------------------------------------------

struct PlanCell {
  std::string run_id;
  Config config;
  std::vector<std::pair<std::string, std::string>> overrides;
};

/// Cartesian product of grid axes over a base configuration.
struct ExperimentPlan {
  Config base;
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  fs::path out_dir;
  int workers = 1;

  static ExperimentPlan FromConfig(const Config& cfg, fs::path out_dir, int workers = 1) {
    ExperimentPlan plan;
    plan.base = cfg.WithoutGrid();
    plan.grid = cfg.GridAxes();
    plan.out_dir = std::move(out_dir);
    plan.workers = workers;
    return plan;
  }

  std::vector<PlanCell> Cells() const {
    std::vector<PlanCell> cells;
    std::vector<std::size_t> idx(grid.size(), 0);
    while (true) {
      PlanCell cell;
      cell.config = base;
      for (std::size_t a = 0; a < grid.size(); ++a) {
        cell.config.Set(grid[a].first, grid[a].second[idx[a]]);
        cell.overrides.emplace_back(grid[a].first, grid[a].second[idx[a]]);
      }
      cell.run_id = RunId(cell.config);
      cells.push_back(std::move(cell));
      std::size_t a = grid.size();
      while (a > 0) {
        --a;
        if (++idx[a] < grid[a].second.size()) break;
        idx[a] = 0;
        if (a == 0) return cells;
      }
      if (grid.empty()) return cells;
    }
  }
};

struct ResultRow {
  std::string run_id;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string status = "ok";
  std::string error;
  double e = NAN;
  double v = NAN;
  double accuracy = NAN;
  double delta_w_norm = NAN;
  double sigma_avg = NAN;
  std::optional<PrsSummary> prs;
  bool cached = false;
};

inline Json RowJson(const ResultRow& r) {
  Json j = {{"run_id", r.run_id}, {"status", r.status}, {"error", r.error},
            {"e", r.e}, {"v", r.v}, {"accuracy", r.accuracy},
            {"delta_w_norm", r.delta_w_norm}, {"sigma_avg", r.sigma_avg}};
  Json ov = Json::object();
  for (const auto& [k, v] : r.overrides) ov[k] = v;
  j["overrides"] = ov;
  if (r.prs) {
    j["prs"] = {{"member_mean", r.prs->member_mean}, {"nonmember_mean", r.prs->nonmember_mean},
                {"target_before", r.prs->target_before}, {"target_after", r.prs->target_after},
                {"target_retrained", r.prs->target_retrained}};
  }
  return j;
}

inline ResultRow RowFromJson(const Json& j) {
  ResultRow r;
  r.run_id = j.at("run_id").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.error = j.at("error").get<std::string>();
  const auto num = [&](const char* k) {
    return j.at(k).is_number() ? j.at(k).get<double>() : NAN;
  };
  r.e = num("e");
  r.v = num("v");
  r.accuracy = num("accuracy");
  r.delta_w_norm = num("delta_w_norm");
  r.sigma_avg = num("sigma_avg");
  for (const auto& [k, v] : j.at("overrides").items()) r.overrides.emplace_back(k, v.get<std::string>());
  if (j.contains("prs")) {
    const Json& p = j.at("prs");
    r.prs = PrsSummary{p.at("member_mean").get<double>(), p.at("nonmember_mean").get<double>(),
                       p.at("target_before").get<double>(), p.at("target_after").get<double>(),
                       p.at("target_retrained").get<double>()};
  }
  return r;
}

/// Runs one configuration end to end and writes its run directory.
inline ResultRow RunCell(const Config& cfg, const fs::path& dir) {
  ResultRow row;
  row.run_id = RunId(cfg);
  const Dataset data = LoadDataset(cfg);
  const ExperimentSpec spec = SpecFromConfig(cfg);
  const PairedResult result = RunPairedExperiment(spec, data);
  row.e = result.e;
  row.v = result.v;
  row.accuracy = result.accuracy;
  row.delta_w_norm = result.delta_w_norm;
  row.sigma_avg = result.sigma_avg;
  if (cfg.GetBool("prs.enabled")) {
    row.prs = RunPrs(spec, data, result, static_cast<int>(cfg.GetInt("prs.bins")),
                     cfg.GetReal("prs.smoothing"));
  }

  std::vector<Json> report;
  report.push_back({{"record", "paired_experiment"}, {"run_id", row.run_id},
                    {"method", std::string(UnlearnMethodName(spec.request.method))},
                    {"gradient_point", std::string(GradientPointName(spec.request.gradient_point))},
                    {"e", result.e}, {"v", result.v}, {"accuracy", result.accuracy},
                    {"delta_w_norm", result.delta_w_norm}, {"sigma_avg", result.sigma_avg},
                    {"amnesiac_nothing_logged", result.amnesiac_nothing_logged}});
  if (!result.trajectory.empty()) {
    report.push_back({{"record", "trajectory"}, {"points", TrajectoryJson(result.trajectory)}});
  }
  if (row.prs) report.push_back({{"record", "prs"}, {"summary", RowJson(row)["prs"]}});
  WriteRunArtifacts(dir, cfg, result.log, report);
  WriteCheckpoint((dir / "checkpoints" / "unlearned.uwgt").string(), result.w_unlearned);
  WriteCheckpoint((dir / "checkpoints" / "retrained.uwgt").string(), result.w_retrained);
  if (!result.trajectory.empty()) {
    std::vector<double> es, vs;
    for (const TrajectoryPoint& p : result.trajectory) {
      es.push_back(p.e);
      vs.push_back(p.v);
    }
    WriteTextFile((dir / "plots" / "trajectory.csv").string(), TrajectoryCsv(result.trajectory));
    WriteTextFile((dir / "plots" / "trajectory.svg").string(),
                  ScatterSvg(es, vs, "unlearning error e", "verification error v",
                             "(e, v) along fine-tuning"));
  }
  return row;
}

struct PlanOutcome {
  std::vector<ResultRow> rows;
  std::size_t computed = 0;
  std::size_t cached = 0;
  std::size_t failed = 0;
};

inline std::string ResultsCsv(const ExperimentPlan& plan, const std::vector<ResultRow>& rows) {
  std::vector<std::string> header = {"run_id"};
  for (const auto& axis : plan.grid) header.push_back(axis.first);
  for (const char* c : {"status", "e", "v", "accuracy", "delta_w_norm", "sigma_avg",
                        "prs_member", "prs_nonmember", "prs_target_before", "prs_target_after",
                        "error"}) {
    header.emplace_back(c);
  }
  CsvWriter csv(header);
  for (const ResultRow& r : rows) {
    csv.Cell(r.run_id);
    for (const auto& [k, v] : r.overrides) csv.Cell(v);
    csv.Cell(r.status);
    for (double x : {r.e, r.v, r.accuracy, r.delta_w_norm, r.sigma_avg}) {
      if (std::isnan(x)) {
        csv.Empty();
      } else {
        csv.Cell(x);
      }
    }
    if (r.prs) {
      csv.Cell(r.prs->member_mean).Cell(r.prs->nonmember_mean)
          .Cell(r.prs->target_before).Cell(r.prs->target_after);
    } else {
      csv.Empty().Empty().Empty().Empty();
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    csv.Cell(err);
    csv.EndRow();
  }
  return csv.str();
}

/// Executes every cell (skipping run ids that already have a result.json),
/// then writes <out>/results.csv in plan order. Cell failures become rows.
inline PlanOutcome RunPlan(const ExperimentPlan& plan) {
  fs::create_directories(plan.out_dir);
  const std::vector<PlanCell> cells = plan.Cells();
  std::vector<ResultRow> rows(cells.size());

  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const PlanCell& cell = cells[i];
      const fs::path dir = plan.out_dir / cell.run_id;
      const fs::path marker = dir / "result.json";
      ResultRow row;
      if (fs::exists(marker)) {
        row = RowFromJson(Json::parse(ReadTextFile(marker.string())));
        row.cached = true;
      } else {
        try {
          row = RunCell(cell.config, dir);
          WriteTextFile(marker.string(), RowJson(row).dump(2) + "\n");
        } catch (const std::exception& ex) {
          row.run_id = cell.run_id;
          row.status = "error";
          row.error = ex.what();
        }
      }
      row.overrides = cell.overrides;
      rows[i] = std::move(row);
    }
  };
  const int workers = std::max(1, std::min<int>(plan.workers, static_cast<int>(cells.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  PlanOutcome out;
  for (const ResultRow& r : rows) {
    if (r.status != "ok") {
      ++out.failed;
    } else if (r.cached) {
      ++out.cached;
    } else {
      ++out.computed;
    }
  }
  out.rows = std::move(rows);
  WriteTextFile((plan.out_dir / "results.csv").string(), ResultsCsv(plan, out.rows));
  return out;
}

}  // namespace unlearn
