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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "unlearn/error.hpp"

namespace unlearn::analysis {

inline constexpr double kProbabilityClip = 1e-12;

/// Modified prediction entropy of a probability vector for a known label:
///   -(1 - p_y) log p_y - sum_{i != y} p_i log(1 - p_i),
/// with probabilities clipped to [1e-12, 1 - 1e-12].
inline double ModifiedEntropy(std::span<const double> probabilities, int label) {
  Require(!probabilities.empty(), ErrorKind::kArgument, "empty probability vector");
  Require(label >= 0 && static_cast<std::size_t>(label) < probabilities.size(),
          ErrorKind::kArgument, "label outside the probability vector");
  double sum = 0.0;
  for (double p : probabilities) {
    Require(std::isfinite(p) && p >= 0.0, ErrorKind::kArgument, "negative or non-finite probability");
    sum += p;
  }
  Require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::kArgument, "probabilities do not sum to 1");

  const auto clip = [](double p) {
    return std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
  };
  double out = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = clip(probabilities[i]);
    if (static_cast<int>(i) == label) {
      out -= (1.0 - p) * std::log(p);
    } else {
      out -= p * std::log(1.0 - p);
    }
  }
  return out;
}

struct LabelHistogram {
  std::vector<double> edges;  // bins + 1 strictly increasing values
  std::vector<double> member;
  std::vector<double> nonmember;
};

/// Per-label Bayes posterior of membership from shadow-model score
/// histograms.
struct PrsModel {
  int bins_per_label = 20;
  double smoothing = 1.0;
  double prior_member = 0.5;
  std::map<int, LabelHistogram> labels;
};

/// Shadow scores grouped by label.
using ScoresByLabel = std::map<int, std::vector<double>>;

namespace detail {

inline std::size_t BinOf(const LabelHistogram& h, double score) {
  const std::size_t bins = h.member.size();
  if (score <= h.edges.front()) return 0;
  if (score >= h.edges.back()) return bins - 1;
  const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), score);
  const std::size_t idx = static_cast<std::size_t>(it - h.edges.begin()) - 1;
  return std::min(idx, bins - 1);
}

}  // namespace detail

/// Uniform bins over the pooled range of each label's scores, additive
/// count smoothing, prior 0.5.
inline PrsModel PrsFit(const ScoresByLabel& members, const ScoresByLabel& nonmembers,
                       int bins_per_label = 20, double smoothing = 1.0) {
  Require(bins_per_label >= 1, ErrorKind::kArgument, "bins_per_label must be >= 1");
  Require(smoothing >= 0.0, ErrorKind::kArgument, "smoothing must be >= 0");
  PrsModel model;
  model.bins_per_label = bins_per_label;
  model.smoothing = smoothing;

  std::vector<int> all_labels;
  for (const auto& [label, scores] : members) all_labels.push_back(label);
  for (const auto& [label, scores] : nonmembers) all_labels.push_back(label);
  std::sort(all_labels.begin(), all_labels.end());
  all_labels.erase(std::unique(all_labels.begin(), all_labels.end()), all_labels.end());

  for (int label : all_labels) {
    const auto m = members.find(label);
    const auto n = nonmembers.find(label);
    if (m == members.end() || m->second.empty() || n == nonmembers.end() || n->second.empty()) {
      Fail(ErrorKind::kFit, "label " + std::to_string(label) +
                                " needs at least one member and one non-member score");
    }
    double lo = m->second.front();
    double hi = lo;
    for (const auto* side : {&m->second, &n->second}) {
      for (double s : *side) {
        Require(std::isfinite(s), ErrorKind::kFit, "non-finite score for label " + std::to_string(label));
        lo = std::min(lo, s);
        hi = std::max(hi, s);
      }
    }
    if (hi <= lo) hi = lo + 1.0;  // degenerate range still needs increasing edges

    LabelHistogram h;
    h.edges.resize(static_cast<std::size_t>(bins_per_label) + 1);
    for (int i = 0; i <= bins_per_label; ++i) {
      h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins_per_label;
    }
    h.edges.back() = hi;
    h.member.assign(static_cast<std::size_t>(bins_per_label), 0.0);
    h.nonmember.assign(static_cast<std::size_t>(bins_per_label), 0.0);
    for (double s : m->second) h.member[detail::BinOf(h, s)] += 1.0;
    for (double s : n->second) h.nonmember[detail::BinOf(h, s)] += 1.0;
    model.labels.emplace(label, std::move(h));
  }
  return model;
}

/// Posterior membership probability f_m * pi / (f_m * pi + f_n * (1 - pi)).
/// Scores outside the fitted range use the nearest edge bin.
inline double PrsScore(const PrsModel& model, double score, int label) {
  const auto it = model.labels.find(label);
  Require(it != model.labels.end(), ErrorKind::kArgument,
          "label " + std::to_string(label) + " was not fitted");
  const LabelHistogram& h = it->second;
  const std::size_t bin = detail::BinOf(h, score);
  const double bins = static_cast<double>(h.member.size());
  double total_m = 0.0, total_n = 0.0;
  for (double c : h.member) total_m += c;
  for (double c : h.nonmember) total_n += c;
  const double f_m = (h.member[bin] + model.smoothing) / (total_m + model.smoothing * bins);
  const double f_n = (h.nonmember[bin] + model.smoothing) / (total_n + model.smoothing * bins);
  const double num = f_m * model.prior_member;
  const double den = num + f_n * (1.0 - model.prior_member);
  if (den <= 0.0) return model.prior_member;
  return std::clamp(num / den, 0.0, 1.0);
}

}  // namespace unlearn::analysis
