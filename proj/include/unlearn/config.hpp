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
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "unlearn/data.hpp"
#include "unlearn/error.hpp"
#include "unlearn/hessian.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/text.hpp"
#include "unlearn/unlearn.hpp"

namespace unlearn {

enum class ValueType { kString, kInt, kReal, kBool, kIntList };

struct KeyInfo {
  std::string_view key;
  ValueType type;
  std::string_view default_value;
};

/// Every recognised configuration key with its default.
inline const std::vector<KeyInfo>& KnownKeys() {
  static const std::vector<KeyInfo> keys = {
      {"data.classes", ValueType::kInt, "2"},
      {"data.images", ValueType::kString, ""},
      {"data.kind", ValueType::kString, "blobs"},
      {"data.label_column", ValueType::kString, "label"},
      {"data.labels", ValueType::kString, ""},
      {"data.max_n", ValueType::kInt, "0"},
      {"data.n", ValueType::kInt, "512"},
      {"data.noise", ValueType::kReal, "0.1"},
      {"data.path", ValueType::kString, ""},
      {"data.seed", ValueType::kInt, "0"},
      {"data.spread", ValueType::kReal, "1"},
      {"experiment.sample_every", ValueType::kInt, "0"},
      {"instrument.epsilon_scale", ValueType::kReal, "1e-05"},
      {"instrument.hvp_probe_batch", ValueType::kInt, "0"},
      {"instrument.power_iters", ValueType::kInt, "100"},
      {"instrument.power_tol", ValueType::kReal, "1e-06"},
      {"instrument.probe_seed", ValueType::kInt, "0"},
      {"instrument.sigma_mode", ValueType::kString, "spectral"},
      {"model.activation", ValueType::kString, "tanh"},
      {"model.init_seed", ValueType::kInt, "0"},
      {"model.layers", ValueType::kIntList, "2,16,16,2"},
      {"prs.bins", ValueType::kInt, "20"},
      {"prs.enabled", ValueType::kBool, "false"},
      {"prs.smoothing", ValueType::kReal, "1"},
      {"train.batch_size", ValueType::kInt, "32"},
      {"train.epochs_over_target", ValueType::kInt, "1"},
      {"train.eta", ValueType::kReal, "0.05"},
      {"train.finetune_steps", ValueType::kInt, "100"},
      {"train.gamma", ValueType::kReal, "0"},
      {"train.lambda", ValueType::kReal, "0"},
      {"train.log_updates", ValueType::kBool, "false"},
      {"train.loss", ValueType::kString, "ce"},
      {"train.pretrain_steps", ValueType::kInt, "0"},
      {"train.seed", ValueType::kInt, "0"},
      {"train.sigma_every", ValueType::kInt, "20"},
      {"unlearn.gradient_point", ValueType::kString, "at_initial"},
      {"unlearn.method", ValueType::kString, "single_gradient"},
      {"unlearn.target_batch", ValueType::kInt, "1"},
  };
  return keys;
}

inline const KeyInfo* FindKey(std::string_view key) {
  for (const KeyInfo& k : KnownKeys()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

inline std::string ValidKeyList() {
  std::string out;
  for (const KeyInfo& k : KnownKeys()) {
    if (!out.empty()) out += ", ";
    out += k.key;
  }
  return out;
}

/// Prefix for plan grid axes: grid.train.gamma=0,0.5,1 sweeps train.gamma.
inline constexpr std::string_view kGridPrefix = "grid.";

namespace detail {

inline std::string NormalizeValue(const KeyInfo& info, const std::string& raw) {
  const std::string value = Trim(raw);
  const std::string where(info.key);
  switch (info.type) {
    case ValueType::kString:
      return value;
    case ValueType::kInt:
      return std::to_string(ParseInt(value, where));
    case ValueType::kReal:
      return FormatDouble(ParseDouble(value, where));
    case ValueType::kBool:
      if (value == "true" || value == "1") return "true";
      if (value == "false" || value == "0") return "false";
      Fail(ErrorKind::kConfig, where + " expects true or false, got '" + value + "'");
    case ValueType::kIntList: {
      std::string out;
      for (const std::string& part : SplitString(value, ',')) {
        if (!out.empty()) out += ',';
        out += std::to_string(ParseInt(part, where));
      }
      return out;
    }
  }
  return value;
}

}  // namespace detail

/// Flat key=value configuration with dotted section prefixes. Lines starting
/// with '#' are comments.
class Config {
 public:
  Config() = default;

  static Config Parse(std::string_view text) {
    Config cfg;
    std::size_t line_no = 0;
    for (const std::string& raw : SplitString(text, '\n')) {
      ++line_no;
      const std::string line = Trim(raw);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        Fail(ErrorKind::kConfig, "line " + std::to_string(line_no) + ": expected key=value");
      }
      cfg.Set(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static Config Load(const std::string& path) { return Parse(ReadTextFile(path)); }

  /// Rejects unknown keys; grid.* keys must name a known key.
  void Set(const std::string& key, const std::string& value) {
    const std::string base = key.starts_with(kGridPrefix) ? key.substr(kGridPrefix.size()) : key;
    if (FindKey(base) == nullptr) {
      Fail(ErrorKind::kConfig, "unknown config key '" + key + "'; valid keys: " + ValidKeyList());
    }
    values_[key] = value;
  }

  /// Applies a KEY=VALUE override string.
  void SetAssignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    Require(eq != std::string_view::npos, ErrorKind::kConfig,
            "override '" + std::string(assignment) + "' is not KEY=VALUE");
    Set(Trim(assignment.substr(0, eq)), Trim(assignment.substr(eq + 1)));
  }

  bool Has(const std::string& key) const { return values_.count(key) > 0; }

  std::string Get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const KeyInfo* info = FindKey(key);
    Require(info != nullptr, ErrorKind::kConfig, "unknown config key '" + key + "'");
    return std::string(info->default_value);
  }

  long long GetInt(const std::string& key) const { return ParseInt(Get(key), key); }
  double GetReal(const std::string& key) const { return ParseDouble(Get(key), key); }
  bool GetBool(const std::string& key) const {
    return detail::NormalizeValue(*FindKey(key), Get(key)) == "true";
  }
  std::vector<std::size_t> GetSizeList(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const std::string& part : SplitString(Get(key), ',')) {
      const long long v = ParseInt(part, key);
      Require(v > 0, ErrorKind::kConfig, key + " entries must be positive");
      out.push_back(static_cast<std::size_t>(v));
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Grid axes in key order.
  std::vector<std::pair<std::string, std::vector<std::string>>> GridAxes() const {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const auto& [key, value] : values_) {
      if (!key.starts_with(kGridPrefix)) continue;
      std::vector<std::string> items;
      for (const std::string& v : SplitString(value, ',')) items.push_back(Trim(v));
      axes.emplace_back(key.substr(kGridPrefix.size()), std::move(items));
    }
    return axes;
  }

  Config WithoutGrid() const {
    Config out;
    for (const auto& [key, value] : values_) {
      if (!key.starts_with(kGridPrefix)) out.values_[key] = value;
    }
    return out;
  }

  /// Sorted key=value lines of exactly the keys that were set.
  std::string Serialize() const {
    std::string out;
    for (const auto& [key, value] : values_) out += key + "=" + value + "\n";
    return out;
  }

  /// Every known key (defaults filled in) with normalized values; the run
  /// identifier is a hash of this text.
  std::string Canonical() const {
    std::string out;
    for (const KeyInfo& info : KnownKeys()) {
      const std::string key(info.key);
      out += key + "=" + detail::NormalizeValue(info, Get(key)) + "\n";
    }
    return out;
  }

  friend bool operator==(const Config&, const Config&) = default;

 private:
  std::map<std::string, std::string> values_;
};

/// 64-bit FNV-1a over the canonical form, as 16 hex digits.
inline std::string RunId(const Config& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.Canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline Dataset LoadDataset(const Config& cfg) {
  const std::string kind = cfg.Get("data.kind");
  const auto seed = static_cast<std::uint64_t>(cfg.GetInt("data.seed"));
  if (kind == "blobs") {
    return GenBlobs(static_cast<std::size_t>(cfg.GetInt("data.n")),
                    static_cast<int>(cfg.GetInt("data.classes")), cfg.GetReal("data.spread"), seed);
  }
  if (kind == "moons") {
    return GenMoons(static_cast<std::size_t>(cfg.GetInt("data.n")), cfg.GetReal("data.noise"), seed);
  }
  if (kind == "csv") return LoadCsv(cfg.Get("data.path"), cfg.Get("data.label_column"), seed);
  if (kind == "idx") {
    return LoadIdx(cfg.Get("data.images"), cfg.Get("data.labels"),
                   static_cast<std::size_t>(cfg.GetInt("data.max_n")), seed);
  }
  Fail(ErrorKind::kConfig, "data.kind must be blobs, moons, csv or idx, got '" + kind + "'");
}

inline HvpConfig HvpFromConfig(const Config& cfg) {
  HvpConfig h;
  h.epsilon_scale = cfg.GetReal("instrument.epsilon_scale");
  h.power_iters_max = static_cast<int>(cfg.GetInt("instrument.power_iters"));
  h.power_tol = cfg.GetReal("instrument.power_tol");
  h.probe_seed = static_cast<std::uint64_t>(cfg.GetInt("instrument.probe_seed"));
  const std::string mode = cfg.Get("instrument.sigma_mode");
  if (mode == "spectral") {
    h.sigma_mode = SigmaMode::kSpectralNorm;
  } else if (mode == "sqrt_lambda") {
    h.sigma_mode = SigmaMode::kSqrtLambdaMax;
  } else {
    Fail(ErrorKind::kConfig, "instrument.sigma_mode must be spectral or sqrt_lambda");
  }
  return h;
}

inline ExperimentSpec SpecFromConfig(const Config& cfg) {
  ExperimentSpec spec;
  spec.model = ModelSpec::Mlp(cfg.GetSizeList("model.layers"),
                              ParseActivation(cfg.Get("model.activation")));
  spec.init_seed = static_cast<std::uint64_t>(cfg.GetInt("model.init_seed"));

  TrainConfig& t = spec.train;
  t.eta = cfg.GetReal("train.eta");
  t.batch_size = static_cast<std::size_t>(cfg.GetInt("train.batch_size"));
  t.pretrain_steps = cfg.GetInt("train.pretrain_steps");
  t.finetune_steps = cfg.GetInt("train.finetune_steps");
  t.epochs_over_target = cfg.GetInt("train.epochs_over_target");
  t.loss.kind = ParseLossKind(cfg.Get("train.loss"));
  t.loss.gamma = cfg.GetReal("train.gamma");
  t.loss.lambda = cfg.GetReal("train.lambda");
  t.seed = static_cast<std::uint64_t>(cfg.GetInt("train.seed"));
  t.sigma_every = cfg.GetInt("train.sigma_every");
  t.log_updates = cfg.GetBool("train.log_updates");
  t.hvp_probe_batch = static_cast<std::size_t>(cfg.GetInt("instrument.hvp_probe_batch"));
  t.hvp = HvpFromConfig(cfg);

  spec.request.method = ParseUnlearnMethod(cfg.Get("unlearn.method"));
  spec.request.gradient_point = ParseGradientPoint(cfg.Get("unlearn.gradient_point"));
  spec.request.target_batch_index = static_cast<std::size_t>(cfg.GetInt("unlearn.target_batch"));
  t.target_batch = spec.request.target_batch_index;
  spec.sample_every = cfg.GetInt("experiment.sample_every");
  return spec;
}

}  // namespace unlearn
