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
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/error.hpp"
#include "unlearn/nn.hpp"
#include "unlearn/rng.hpp"
#include "unlearn/text.hpp"

namespace unlearn {

enum class Provenance { kBlobs, kMoons, kCsv, kIdx };

/// Labeled examples plus a fixed train/test split.
struct Dataset {
  std::string name;
  Matrix inputs;
  std::vector<int> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  Provenance provenance = Provenance::kBlobs;

  std::size_t size() const { return inputs.rows; }
  std::size_t features() const { return inputs.cols; }

  int num_classes() const {
    int c = 0;
    for (int y : labels) c = std::max(c, y + 1);
    return std::max(c, 2);
  }
};

/// Gathers the given rows into a Batch.
inline Batch MakeBatch(const Dataset& data, std::span<const std::size_t> rows) {
  Batch batch;
  batch.inputs = Matrix(rows.size(), data.features());
  batch.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Require(rows[r] < data.size(), ErrorKind::kArgument, "row index out of range");
    const auto src = data.inputs.row(rows[r]);
    std::copy(src.begin(), src.end(), batch.inputs.row(r).begin());
    batch.labels.push_back(data.labels[rows[r]]);
  }
  return batch;
}

/// Seeded 80/20 split of all rows.
inline void AssignSplit(Dataset& data, std::uint64_t seed) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed ^ 0x5851f42d4c957f2dULL);
  rng.Shuffle(std::span<std::size_t>(order));
  const std::size_t n_train = (data.size() * 4) / 5;
  data.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  data.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(data.train.begin(), data.train.end());
  std::sort(data.test.begin(), data.test.end());
}

/// Isotropic Gaussian blobs around the vertices of a regular polygon of
/// radius 3 in the plane. spread is the per-coordinate standard deviation.
inline Dataset GenBlobs(std::size_t n, int classes, double spread, std::uint64_t seed) {
  Require(n >= 10, ErrorKind::kArgument, "blobs need n >= 10");
  Require(classes >= 2, ErrorKind::kArgument, "blobs need at least 2 classes");
  Require(spread >= 0.0 && std::isfinite(spread), ErrorKind::kArgument, "spread must be >= 0");
  Dataset data;
  data.name = "blobs";
  data.provenance = Provenance::kBlobs;
  data.inputs = Matrix(n, 2);
  data.labels.resize(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    const double angle = 2.0 * std::numbers::pi * label / classes;
    data.inputs(i, 0) = 3.0 * std::cos(angle) + spread * rng.Normal();
    data.inputs(i, 1) = 3.0 * std::sin(angle) + spread * rng.Normal();
    data.labels[i] = label;
  }
  AssignSplit(data, seed);
  return data;
}

/// Two interleaving half circles.
inline Dataset GenMoons(std::size_t n, double noise, std::uint64_t seed) {
  Require(n >= 10, ErrorKind::kArgument, "moons need n >= 10");
  Require(noise >= 0.0 && std::isfinite(noise), ErrorKind::kArgument, "noise must be >= 0");
  Dataset data;
  data.name = "moons";
  data.provenance = Provenance::kMoons;
  data.inputs = Matrix(n, 2);
  data.labels.resize(n);
  Rng rng(seed);
  const std::size_t n_outer = (n + 1) / 2;
  const std::size_t n_inner = n - n_outer;
  for (std::size_t i = 0; i < n; ++i) {
    const bool outer = i < n_outer;
    const std::size_t k = outer ? i : i - n_outer;
    const std::size_t count = outer ? n_outer : n_inner;
    const double theta = count > 1 ? std::numbers::pi * k / (count - 1) : 0.0;
    double x = outer ? std::cos(theta) : 1.0 - std::cos(theta);
    double y = outer ? std::sin(theta) : 0.5 - std::sin(theta);
    x += noise * rng.Normal();
    y += noise * rng.Normal();
    data.inputs(i, 0) = x;
    data.inputs(i, 1) = y;
    data.labels[i] = outer ? 0 : 1;
  }
  AssignSplit(data, seed);
  return data;
}

/// Numeric CSV; `label_column` is a header name or a zero-based index. A
/// first row that does not parse as numbers is treated as the header.
inline Dataset LoadCsv(const std::string& path, const std::string& label_column,
                       std::uint64_t split_seed = 0) {
  const std::string text = ReadTextFile(path);
  std::vector<std::vector<std::string>> rows;
  for (const std::string& line : SplitString(text, '\n')) {
    if (Trim(line).empty()) continue;
    rows.push_back(SplitString(line, ','));
  }
  Require(!rows.empty(), ErrorKind::kFormat, path + ": empty CSV");

  std::vector<std::string> header;
  const bool has_header = std::any_of(rows.front().begin(), rows.front().end(),
                                      [](const std::string& f) { return !TryParseDouble(f); });
  if (has_header) {
    for (const auto& f : rows.front()) header.push_back(Trim(f));
    rows.erase(rows.begin());
  }
  Require(!rows.empty(), ErrorKind::kFormat, path + ": CSV has a header but no rows");
  const std::size_t width = rows.front().size();
  Require(width >= 2, ErrorKind::kFormat, path + ": CSV needs a feature and a label column");

  std::size_t label_idx = width;
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it != header.end()) {
    label_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    const auto as_int = TryParseDouble(label_column);
    Require(as_int && *as_int >= 0 && *as_int == std::floor(*as_int) &&
                static_cast<std::size_t>(*as_int) < width,
            ErrorKind::kFormat, path + ": unknown label column '" + label_column + "'");
    label_idx = static_cast<std::size_t>(*as_int);
  }

  Dataset data;
  data.name = path;
  data.provenance = Provenance::kCsv;
  data.inputs = Matrix(rows.size(), width - 1);
  data.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::string where = path + " row " + std::to_string(r + (has_header ? 2 : 1));
    Require(rows[r].size() == width, ErrorKind::kFormat, where + ": wrong number of fields");
    std::size_t col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_idx) {
        const long long y = ParseInt(rows[r][c], where);
        Require(y >= 0, ErrorKind::kFormat, where + ": negative label");
        data.labels[r] = static_cast<int>(y);
      } else {
        data.inputs(r, col++) = ParseDouble(rows[r][c], where);
      }
    }
  }
  AssignSplit(data, split_seed);
  return data;
}

/// Writes features as x0..x{d-1} followed by a `label` column.
inline void WriteCsv(const Dataset& data, const std::string& path) {
  std::vector<std::string> header;
  for (std::size_t c = 0; c < data.features(); ++c) header.push_back("x" + std::to_string(c));
  header.emplace_back("label");
  CsvWriter csv(header);
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t c = 0; c < data.features(); ++c) csv.Cell(data.inputs(r, c));
    csv.Cell(data.labels[r]);
    csv.EndRow();
  }
  WriteTextFile(path, csv.str());
}

namespace detail {

inline std::uint32_t ReadBigEndian32(const std::string& bytes, std::size_t offset,
                                     const std::string& path) {
  if (offset + 4 > bytes.size()) {
    Fail(ErrorKind::kFormat, path + ": truncated header at byte offset " + std::to_string(offset));
  }
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  }
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// MNIST-style IDX pair. Pixels are scaled to [0, 1]. max_n = 0 loads all.
inline Dataset LoadIdx(const std::string& images_path, const std::string& labels_path,
                       std::size_t max_n = 0, std::uint64_t split_seed = 0) {
  const std::string images = ReadTextFile(images_path);
  const std::string labels = ReadTextFile(labels_path);

  const std::uint32_t img_magic = detail::ReadBigEndian32(images, 0, images_path);
  if (img_magic != kIdxImagesMagic) {
    Fail(ErrorKind::kFormat, images_path + ": bad IDX image magic at byte offset 0");
  }
  const std::uint32_t lbl_magic = detail::ReadBigEndian32(labels, 0, labels_path);
  if (lbl_magic != kIdxLabelsMagic) {
    Fail(ErrorKind::kFormat, labels_path + ": bad IDX label magic at byte offset 0");
  }
  std::size_t n = detail::ReadBigEndian32(images, 4, images_path);
  const std::size_t rows = detail::ReadBigEndian32(images, 8, images_path);
  const std::size_t cols = detail::ReadBigEndian32(images, 12, images_path);
  const std::size_t n_labels = detail::ReadBigEndian32(labels, 4, labels_path);
  if (n_labels != n) {
    Fail(ErrorKind::kFormat, labels_path + ": label count at byte offset 4 does not match images");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + n * pixels) {
    Fail(ErrorKind::kFormat, images_path + ": pixel data truncated at byte offset " +
                                 std::to_string(images.size()));
  }
  if (labels.size() < 8 + n) {
    Fail(ErrorKind::kFormat, labels_path + ": label data truncated at byte offset " +
                                 std::to_string(labels.size()));
  }
  if (max_n > 0) n = std::min(n, max_n);

  Dataset data;
  data.name = images_path;
  data.provenance = Provenance::kIdx;
  data.inputs = Matrix(n, pixels);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      data.inputs(i, p) = static_cast<unsigned char>(images[16 + i * pixels + p]) / 255.0;
    }
    data.labels[i] = static_cast<unsigned char>(labels[8 + i]);
  }
  Require(n >= 1, ErrorKind::kData, images_path + ": no examples");
  AssignSplit(data, split_seed);
  return data;
}

}  // namespace unlearn
