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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "unlearn/error.hpp"

namespace unlearn {

/// Flat, ordered weight vector. Every model exposes its parameters as one of
/// these so that weight-space quantities (distances, HVPs, unlearning
/// corrections) never need to know about layers.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t size, double fill = 0.0) : values_(size, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  ParamVector& operator+=(const ParamVector& other) {
    CheckSameSize(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  ParamVector& operator-=(const ParamVector& other) {
    CheckSameSize(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
  }

  ParamVector& operator*=(double scale) {
    for (double& v : values_) v *= scale;
    return *this;
  }

  /// this += scale * other
  ParamVector& Axpy(double scale, const ParamVector& other) {
    CheckSameSize(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
    return *this;
  }

  bool AllFinite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  void CheckSameSize(const ParamVector& other) const {
    if (other.size() != size()) {
      Fail(ErrorKind::kShape, "parameter vector length mismatch: " +
                                  std::to_string(size()) + " vs " +
                                  std::to_string(other.size()));
    }
  }

  std::vector<double> values_;
};

inline ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
inline ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
inline ParamVector operator*(double s, ParamVector a) { return a *= s; }

inline double Dot(const ParamVector& a, const ParamVector& b) {
  Require(a.size() == b.size(), ErrorKind::kShape, "dot of vectors with different lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double Norm2(const ParamVector& a) { return std::sqrt(Dot(a, a)); }

inline double NormInf(const ParamVector& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Euclidean distance ||a - b||_2.
inline double Distance(const ParamVector& a, const ParamVector& b) {
  Require(a.size() == b.size(), ErrorKind::kShape,
          "distance between vectors of lengths " + std::to_string(a.size()) + " and " +
              std::to_string(b.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace unlearn
