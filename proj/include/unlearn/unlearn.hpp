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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unlearn/data.hpp"
#include "unlearn/error.hpp"
#include "unlearn/hessian.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/param_vector.hpp"
#include "unlearn/rng.hpp"
#include "unlearn/unrolled.hpp"

namespace unlearn {

/// Loss above this (or non-finite) aborts training.
inline constexpr double kDivergenceLoss = 1e6;

struct TrainConfig {
  double eta = 0.05;
  std::size_t batch_size = 32;
  long long pretrain_steps = 0;   // N
  long long finetune_steps = 100; // t
  long long epochs_over_target = 1;  // m: occurrences of the target batch
  std::size_t target_batch = 1;   // fine-tune step of the first occurrence
  LossSpec loss;
  std::uint64_t seed = 0;
  long long sigma_every = 20;
  std::size_t hvp_probe_batch = 0;  // rows of the batch used for sigma; 0 = all
  long long checkpoint_every = 0;   // extra trajectory checkpoints; 0 = endpoints only
  bool log_updates = false;
  HvpConfig hvp;

  void Validate() const {
    Require(std::isfinite(eta) && eta >= 0.0, ErrorKind::kArgument,
            "eta must be finite and nonnegative");
    Require(batch_size >= 1, ErrorKind::kArgument, "batch_size must be >= 1");
    Require(pretrain_steps >= 0, ErrorKind::kArgument, "pretrain_steps must be >= 0");
    Require(finetune_steps >= 1, ErrorKind::kArgument, "finetune_steps must be >= 1");
    Require(epochs_over_target >= 1, ErrorKind::kArgument, "epochs_over_target must be >= 1");
    Require(static_cast<long long>(target_batch) < finetune_steps, ErrorKind::kArgument,
            "target batch " + std::to_string(target_batch) + " is not among the " +
                std::to_string(finetune_steps) + " fine-tune steps");
    Require(finetune_steps - static_cast<long long>(target_batch) >= epochs_over_target,
            ErrorKind::kArgument, "not enough fine-tune steps after the target for m occurrences");
    Require(sigma_every >= 1, ErrorKind::kArgument, "sigma_every must be >= 1");
    Require(checkpoint_every >= 0, ErrorKind::kArgument, "checkpoint_every must be >= 0");
    loss.Validate();
    hvp.Validate();
  }
};

/// Deterministic batch order for one run. The target rows are held out of
/// the fine-tune stream and only enter at `target_steps`, so removing those
/// steps leaves exactly the retraining sequence.
struct Schedule {
  std::vector<std::vector<std::size_t>> pretrain;
  std::vector<std::vector<std::size_t>> finetune;
  std::vector<std::size_t> target_rows;
  std::vector<long long> target_steps;  // fine-tune local indices, ascending

  bool IsTargetStep(long long s) const {
    return std::binary_search(target_steps.begin(), target_steps.end(), s);
  }
};

namespace detail {

class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed)
      : pool_(std::move(pool)), batch_size_(batch_size), rng_(seed) {
    Require(pool_.size() >= batch_size_, ErrorKind::kData,
            "only " + std::to_string(pool_.size()) + " examples for batch size " +
                std::to_string(batch_size_));
    rng_.Shuffle(std::span<std::size_t>(pool_));
  }

  std::vector<std::size_t> Next() {
    if (cursor_ + batch_size_ > pool_.size()) {
      rng_.Shuffle(std::span<std::size_t>(pool_));
      cursor_ = 0;
    }
    std::vector<std::size_t> out(pool_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 pool_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
    cursor_ += batch_size_;
    return out;
  }

 private:
  std::vector<std::size_t> pool_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

}  // namespace detail

inline Schedule BuildSchedule(const Dataset& data, const TrainConfig& cfg) {
  cfg.Validate();
  const std::size_t b = cfg.batch_size;
  Require(data.train.size() >= 2 * b, ErrorKind::kData,
          "training split too small: need at least two batches of " + std::to_string(b));
  Schedule s;

  std::vector<std::size_t> shuffled = data.train;
  Rng rng(cfg.seed);
  rng.Shuffle(std::span<std::size_t>(shuffled));
  s.target_rows.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(b));
  std::vector<std::size_t> pool(shuffled.begin() + static_cast<std::ptrdiff_t>(b), shuffled.end());

  detail::BatchStream pre(data.train, b, cfg.seed * 0x9E3779B97F4A7C15ULL + 1);
  for (long long i = 0; i < cfg.pretrain_steps; ++i) s.pretrain.push_back(pre.Next());

  const long long t = cfg.finetune_steps;
  const long long k = static_cast<long long>(cfg.target_batch);
  const long long stride = (t - k) / cfg.epochs_over_target;
  for (long long j = 0; j < cfg.epochs_over_target; ++j) s.target_steps.push_back(k + j * stride);

  detail::BatchStream fine(std::move(pool), b, cfg.seed * 0x9E3779B97F4A7C15ULL + 2);
  for (long long i = 0; i < t; ++i) {
    s.finetune.push_back(s.IsTargetStep(i) ? s.target_rows : fine.Next());
  }
  return s;
}

struct StepRecord {
  long long step = 0;
  double loss = 0.0;      // held-out loss of w_step
  double accuracy = 0.0;  // held-out accuracy of w_step
  std::optional<double> sigma_top;
  double delta_w_norm = 0.0;  // ||w_step - w_N||
};

struct TargetUpdate {
  long long step = 0;
  ParamVector update;  // -eta * grad applied at `step`
};

/// The two weight vectors single-gradient unlearning is allowed to see.
struct Endpoints {
  long long initial_step = 0;
  long long final_step = 0;
  ParamVector initial;
  ParamVector final;
};

/// Per-run instrumentation. Steps are global: fine-tuning covers
/// [pretrain_steps, pretrain_steps + finetune_steps].
struct RunLog {
  long long pretrain_steps = 0;
  long long finetune_steps = 0;
  double eta = 0.0;
  std::size_t batch_size = 0;
  bool log_updates = false;
  std::vector<StepRecord> records;
  std::map<long long, ParamVector> checkpoints;
  std::vector<TargetUpdate> target_updates;
  std::vector<long long> target_steps;  // global
  std::vector<SigmaSample> sigma_samples;

  long long initial_step() const { return pretrain_steps; }
  long long final_step() const { return pretrain_steps + finetune_steps; }

  const ParamVector& Checkpoint(long long step) const {
    const auto it = checkpoints.find(step);
    if (it == checkpoints.end()) {
      Fail(ErrorKind::kState, "run has no checkpoint at step " + std::to_string(step));
    }
    return it->second;
  }

  Endpoints GetEndpoints() const {
    return Endpoints{initial_step(), final_step(), Checkpoint(initial_step()),
                     Checkpoint(final_step())};
  }
};

struct TrainOutcome {
  Model model;
  RunLog log;
};

namespace detail {

inline void GuardLoss(double loss, long long step) {
  if (!std::isfinite(loss)) throw TrainingError(step, "non-finite training loss");
  if (loss > kDivergenceLoss) throw TrainingError(step, "training loss exceeded 1e6");
}

inline Batch ProbeBatch(const Batch& batch, std::size_t rows) {
  if (rows == 0 || rows >= batch.size()) return batch;
  Batch probe;
  probe.inputs = Matrix(rows, batch.inputs.cols,
                        std::vector<double>(batch.inputs.data.begin(),
                                            batch.inputs.data.begin() +
                                                static_cast<std::ptrdiff_t>(rows * batch.inputs.cols)));
  probe.labels.assign(batch.labels.begin(), batch.labels.begin() + static_cast<std::ptrdiff_t>(rows));
  return probe;
}

}  // namespace detail

/// N pretraining steps, then t instrumented fine-tune steps. Sigma is
/// sampled at fine-tune steps 0, sigma_every, 2*sigma_every, ... on the batch
/// about to be applied, at the current weights.
inline TrainOutcome Train(const Model& model0, const Dataset& data, const TrainConfig& cfg) {
  const Schedule schedule = BuildSchedule(data, cfg);
  const NetworkObjective objective(model0.spec, cfg.loss);
  const Batch held_out = MakeBatch(data, data.test.empty() ? data.train : data.test);

  ParamVector w = model0.weights;
  ParamVector grad;
  for (long long i = 0; i < cfg.pretrain_steps; ++i) {
    const Batch batch = MakeBatch(data, schedule.pretrain[static_cast<std::size_t>(i)]);
    detail::GuardLoss(objective.LossAndGradient(w, batch, grad), i);
    Require(grad.AllFinite(), ErrorKind::kNumeric, "non-finite gradient");
    w.Axpy(-cfg.eta, grad);
  }

  RunLog log;
  log.pretrain_steps = cfg.pretrain_steps;
  log.finetune_steps = cfg.finetune_steps;
  log.eta = cfg.eta;
  log.batch_size = cfg.batch_size;
  log.log_updates = cfg.log_updates;
  for (long long s : schedule.target_steps) log.target_steps.push_back(cfg.pretrain_steps + s);

  const ParamVector w_initial = w;
  log.checkpoints.emplace(cfg.pretrain_steps, w);

  const auto record = [&](long long step, std::optional<double> sigma) {
    StepRecord r;
    r.step = step;
    r.loss = objective.Loss(w, held_out);
    r.accuracy = Accuracy(objective, w, held_out);
    r.sigma_top = sigma;
    r.delta_w_norm = Distance(w, w_initial);
    log.records.push_back(r);
  };

  for (long long s = 0; s < cfg.finetune_steps; ++s) {
    const long long step = cfg.pretrain_steps + s;
    const Batch batch = MakeBatch(data, schedule.finetune[static_cast<std::size_t>(s)]);
    std::optional<double> sigma;
    if (s % cfg.sigma_every == 0) {
      sigma = TopSingularValue(objective, w, detail::ProbeBatch(batch, cfg.hvp_probe_batch),
                               cfg.hvp).value;
      log.sigma_samples.push_back(SigmaSample{step, *sigma});
    }
    record(step, sigma);

    detail::GuardLoss(objective.LossAndGradient(w, batch, grad), step);
    Require(grad.AllFinite(), ErrorKind::kNumeric, "non-finite gradient");
    if (cfg.log_updates && schedule.IsTargetStep(s)) {
      log.target_updates.push_back(TargetUpdate{step, -cfg.eta * grad});
    }
    w.Axpy(-cfg.eta, grad);
    if (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0) {
      log.checkpoints.emplace(step + 1, w);
    }
  }
  record(log.final_step(), std::nullopt);
  log.checkpoints.insert_or_assign(log.final_step(), w);
  return TrainOutcome{Model{model0.spec, std::move(w)}, std::move(log)};
}

struct RetrainOutcome {
  Model model;
  /// Retrained weights after the same number of original fine-tune steps
  /// (target steps skipped), keyed by the original global step.
  std::map<long long, ParamVector> aligned;
};

/// Replays fine-tuning from w_N with every target occurrence removed.
inline RetrainOutcome RetrainOracle(const Model& at_initial, const Dataset& data,
                                    const TrainConfig& cfg) {
  const Schedule schedule = BuildSchedule(data, cfg);
  const NetworkObjective objective(at_initial.spec, cfg.loss);
  ParamVector w = at_initial.weights;
  ParamVector grad;
  RetrainOutcome out;
  for (long long s = 0; s < cfg.finetune_steps; ++s) {
    const long long step = cfg.pretrain_steps + s;
    if (!schedule.IsTargetStep(s)) {
      const Batch batch = MakeBatch(data, schedule.finetune[static_cast<std::size_t>(s)]);
      detail::GuardLoss(objective.LossAndGradient(w, batch, grad), step);
      Require(grad.AllFinite(), ErrorKind::kNumeric, "non-finite gradient");
      w.Axpy(-cfg.eta, grad);
    }
    if (cfg.checkpoint_every > 0 && (s + 1) % cfg.checkpoint_every == 0) {
      out.aligned.emplace(step + 1, w);
    }
  }
  out.aligned.insert_or_assign(cfg.pretrain_steps + cfg.finetune_steps, w);
  out.model = Model{at_initial.spec, std::move(w)};
  return out;
}

enum class UnlearnMethod { kSingleGradient, kAmnesiac };
enum class GradientPoint { kAtInitial, kAtFinal };
enum class TargetGranularity { kWholeBatch, kSingleExample };

inline std::string_view UnlearnMethodName(UnlearnMethod m) {
  return m == UnlearnMethod::kSingleGradient ? "single_gradient" : "amnesiac";
}
inline UnlearnMethod ParseUnlearnMethod(std::string_view s) {
  if (s == "single_gradient") return UnlearnMethod::kSingleGradient;
  if (s == "amnesiac") return UnlearnMethod::kAmnesiac;
  Fail(ErrorKind::kArgument, "unknown unlearning method '" + std::string(s) + "'");
}
inline std::string_view GradientPointName(GradientPoint p) {
  return p == GradientPoint::kAtInitial ? "at_initial" : "at_final";
}
inline GradientPoint ParseGradientPoint(std::string_view s) {
  if (s == "at_initial") return GradientPoint::kAtInitial;
  if (s == "at_final") return GradientPoint::kAtFinal;
  Fail(ErrorKind::kArgument, "unknown gradient point '" + std::string(s) + "'");
}

struct UnlearnRequest {
  UnlearnMethod method = UnlearnMethod::kSingleGradient;
  GradientPoint gradient_point = GradientPoint::kAtInitial;
  std::size_t target_batch_index = 1;
};

struct SingleGradientParams {
  double eta = 0.0;
  long long m = 1;
  std::size_t b = 1;
  GradientPoint point = GradientPoint::kAtInitial;
  TargetGranularity granularity = TargetGranularity::kWholeBatch;
};

/// w'' = w_final + scale * grad(w_eval, target) with scale = eta * m, or
/// eta * m / b when unlearning one example of a batch.
template <Objective O>
ParamVector SingleGradientUnlearn(const Endpoints& ends, const O& objective,
                                  const BatchOf<O>& target, const SingleGradientParams& p) {
  Require(p.m >= 1, ErrorKind::kArgument, "m must be >= 1");
  Require(p.b >= 1, ErrorKind::kArgument, "b must be >= 1");
  Require(std::isfinite(p.eta) && p.eta >= 0.0, ErrorKind::kArgument, "eta must be >= 0");
  double scale = p.eta * static_cast<double>(p.m);
  if (p.granularity == TargetGranularity::kSingleExample) {
    if constexpr (requires { target.size(); }) {
      Require(target.size() == 1, ErrorKind::kArgument,
              "single-example unlearning expects exactly one row");
    }
    scale /= static_cast<double>(p.b);
  }
  const ParamVector& w_eval = p.point == GradientPoint::kAtInitial ? ends.initial : ends.final;
  ParamVector out = ends.final;
  out.Axpy(scale, objective.Gradient(w_eval, target));
  return out;
}

inline Model SingleGradientUnlearn(const RunLog& run, const NetworkObjective& objective,
                                   const Batch& target, const SingleGradientParams& p) {
  return Model{objective.spec(), SingleGradientUnlearn(run.GetEndpoints(), objective, target, p)};
}

struct AmnesiacOutcome {
  Model model;
  bool nothing_logged = false;
};

/// Subtracts every logged target update from the final weights.
inline AmnesiacOutcome AmnesiacUnlearn(const RunLog& run, const Model& model_final,
                                       long long up_to_step = -1) {
  Require(run.log_updates, ErrorKind::kState, "amnesiac unlearning needs logged updates");
  AmnesiacOutcome out{model_final, false};
  std::size_t applied = 0;
  for (const TargetUpdate& u : run.target_updates) {
    if (up_to_step >= 0 && u.step >= up_to_step) continue;
    out.model.weights -= u.update;
    ++applied;
  }
  out.nothing_logged = applied == 0;
  return out;
}

/// v = ||w'' - w'||_2
inline double VerificationError(const ParamVector& unlearned, const ParamVector& retrained) {
  return Distance(unlearned, retrained);
}

struct TrajectoryPoint {
  long long steps = 0;  // fine-tune steps completed
  double e = 0.0;
  double v = 0.0;
  double delta_w_norm = 0.0;
  double sigma_avg = 0.0;
};

struct ExperimentSpec {
  ModelSpec model;
  std::uint64_t init_seed = 0;
  TrainConfig train;
  UnlearnRequest request;
  long long sample_every = 0;  // (e, v) trajectory cadence; 0 = final only
};

struct PairedResult {
  double e = 0.0;
  double v = 0.0;
  double accuracy = 0.0;
  double sigma_avg = 0.0;
  double delta_w_norm = 0.0;
  RunLog log;
  ParamVector w_final;
  ParamVector w_unlearned;
  ParamVector w_retrained;
  std::vector<TrajectoryPoint> trajectory;
  bool amnesiac_nothing_logged = false;
};

/// e from a run after `steps` fine-tune steps, using the sigma samples taken
/// before that point.
inline double UnlearningErrorAt(const RunLog& log, long long steps, double* sigma_avg_out = nullptr,
                                double* delta_out = nullptr) {
  std::vector<SigmaSample> seen;
  for (const SigmaSample& s : log.sigma_samples) {
    if (s.step < log.initial_step() + steps) seen.push_back(s);
  }
  const double sigma_avg = seen.empty() ? 0.0 : SigmaAverage(seen);
  const double delta =
      Distance(log.Checkpoint(log.initial_step() + steps), log.Checkpoint(log.initial_step()));
  if (sigma_avg_out) *sigma_avg_out = sigma_avg;
  if (delta_out) *delta_out = delta;
  return UnlearningError(ErrorInputs{log.eta, steps, delta, sigma_avg});
}

/// Train, retrain without the target batch, unlearn it, and compare.
inline PairedResult RunPairedExperiment(const ExperimentSpec& spec, const Dataset& data) {
  TrainConfig cfg = spec.train;
  cfg.target_batch = spec.request.target_batch_index;
  if (spec.request.method == UnlearnMethod::kAmnesiac) cfg.log_updates = true;
  if (spec.sample_every > 0) cfg.checkpoint_every = spec.sample_every;
  Require(spec.sample_every >= 0, ErrorKind::kArgument, "sample_every must be >= 0");

  const Model model0 = InitModel(spec.model, spec.init_seed);
  TrainOutcome trained = Train(model0, data, cfg);
  const RunLog& log = trained.log;
  const Model at_initial{spec.model, log.Checkpoint(log.initial_step())};
  const RetrainOutcome retrained = RetrainOracle(at_initial, data, cfg);

  const Schedule schedule = BuildSchedule(data, cfg);
  const Batch target = MakeBatch(data, schedule.target_rows);
  const NetworkObjective objective(spec.model, cfg.loss);

  const auto unlearn_at = [&](long long steps, long long occurrences) -> std::pair<ParamVector, bool> {
    const long long step = log.initial_step() + steps;
    if (spec.request.method == UnlearnMethod::kAmnesiac) {
      AmnesiacOutcome a = AmnesiacUnlearn(log, Model{spec.model, log.Checkpoint(step)}, step);
      return {std::move(a.model.weights), a.nothing_logged};
    }
    Endpoints ends{log.initial_step(), step, log.Checkpoint(log.initial_step()), log.Checkpoint(step)};
    SingleGradientParams p{cfg.eta, occurrences, cfg.batch_size, spec.request.gradient_point,
                           TargetGranularity::kWholeBatch};
    return {SingleGradientUnlearn(ends, objective, target, p), false};
  };

  PairedResult out;
  out.w_final = trained.model.weights;
  out.w_retrained = retrained.model.weights;
  {
    auto [w, empty] = unlearn_at(cfg.finetune_steps, cfg.epochs_over_target);
    out.w_unlearned = std::move(w);
    out.amnesiac_nothing_logged = empty;
  }
  out.v = VerificationError(out.w_unlearned, out.w_retrained);
  out.e = UnlearningErrorAt(log, cfg.finetune_steps, &out.sigma_avg, &out.delta_w_norm);
  const Batch held_out = MakeBatch(data, data.test.empty() ? data.train : data.test);
  out.accuracy = Accuracy(objective, out.w_final, held_out);

  if (spec.sample_every > 0) {
    for (long long s = spec.sample_every; s <= cfg.finetune_steps; s += spec.sample_every) {
      const long long occurrences = static_cast<long long>(std::count_if(
          schedule.target_steps.begin(), schedule.target_steps.end(),
          [&](long long ts) { return ts < s; }));
      if (occurrences == 0) continue;
      TrajectoryPoint pt;
      pt.steps = s;
      pt.e = UnlearningErrorAt(log, s, &pt.sigma_avg, &pt.delta_w_norm);
      const auto [w_unl, unused] = unlearn_at(s, occurrences);
      pt.v = VerificationError(w_unl, retrained.aligned.at(log.initial_step() + s));
      out.trajectory.push_back(pt);
    }
  }
  out.log = std::move(trained.log);
  return out;
}

}  // namespace unlearn
