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

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "unlearn/error.hpp"
#include "unlearn/param_vector.hpp"
#include "unlearn/text.hpp"
#include "unlearn/unlearn.hpp"

namespace unlearn {

// Checkpoint layout (all little-endian):
//   "UWGT" | u32 version | u64 parameter count | count x f64

inline constexpr char kCheckpointMagic[4] = {'U', 'W', 'G', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void PutLe(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t GetLe(const std::string& in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(in[offset + static_cast<std::size_t>(i)]);
  }
  return v;
}

}  // namespace detail

inline std::string EncodeCheckpoint(const ParamVector& w) {
  std::string out(kCheckpointMagic, 4);
  detail::PutLe(out, kCheckpointVersion, 4);
  detail::PutLe(out, w.size(), 8);
  for (double v : w) detail::PutLe(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

inline ParamVector DecodeCheckpoint(const std::string& bytes) {
  Require(bytes.size() >= 16, ErrorKind::kFormat, "checkpoint shorter than its 16-byte header");
  Require(std::memcmp(bytes.data(), kCheckpointMagic, 4) == 0, ErrorKind::kFormat,
          "checkpoint magic is not UWGT");
  const auto version = static_cast<std::uint32_t>(detail::GetLe(bytes, 4, 4));
  Require(version == kCheckpointVersion, ErrorKind::kFormat,
          "unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t count = detail::GetLe(bytes, 8, 8);
  Require(bytes.size() == 16 + 8 * count, ErrorKind::kFormat,
          "checkpoint payload does not match its parameter count");
  ParamVector w(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::bit_cast<double>(detail::GetLe(bytes, 16 + 8 * i, 8));
  }
  return w;
}

inline void WriteCheckpoint(const std::string& path, const ParamVector& w) {
  WriteTextFile(path, EncodeCheckpoint(w));
}

inline ParamVector ReadCheckpoint(const std::string& path) {
  return DecodeCheckpoint(ReadTextFile(path));
}

inline const std::vector<std::string>& RunLogHeader() {
  static const std::vector<std::string> header = {"step", "loss", "accuracy", "sigma_top",
                                                  "delta_w_norm"};
  return header;
}

inline std::string RunLogCsv(const RunLog& log) {
  CsvWriter csv(RunLogHeader());
  for (const StepRecord& r : log.records) {
    csv.Cell(r.step).Cell(r.loss).Cell(r.accuracy);
    if (r.sigma_top) {
      csv.Cell(*r.sigma_top);
    } else {
      csv.Empty();
    }
    csv.Cell(r.delta_w_norm);
    csv.EndRow();
  }
  return csv.str();
}

inline std::vector<StepRecord> ParseRunLogCsv(const std::string& text) {
  const std::vector<std::string> lines = SplitString(text, '\n');
  Require(!lines.empty() && Trim(lines.front()) == "step,loss,accuracy,sigma_top,delta_w_norm",
          ErrorKind::kFormat, "runlog CSV header mismatch");
  std::vector<StepRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    const std::vector<std::string> f = SplitString(lines[i], ',');
    Require(f.size() == 5, ErrorKind::kFormat, "runlog row " + std::to_string(i) + " needs 5 fields");
    StepRecord r;
    r.step = ParseInt(f[0], "step");
    r.loss = ParseDouble(f[1], "loss");
    r.accuracy = ParseDouble(f[2], "accuracy");
    if (!Trim(f[3]).empty()) r.sigma_top = ParseDouble(f[3], "sigma_top");
    r.delta_w_norm = ParseDouble(f[4], "delta_w_norm");
    out.push_back(r);
  }
  return out;
}

}  // namespace unlearn
