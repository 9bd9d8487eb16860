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

#include <stdexcept>
#include <string>
#include <string_view>

namespace unlearn {

enum class ErrorKind {
  kShape,
  kLabel,
  kNumeric,
  kArgument,
  kSize,
  kState,
  kFit,
  kEnumeration,
  kGrid,
  kFormat,
  kConfig,
  kData,
  kTraining,
  kIo,
};

inline std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kLabel: return "label";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kArgument: return "argument";
    case ErrorKind::kSize: return "size";
    case ErrorKind::kState: return "state";
    case ErrorKind::kFit: return "fit";
    case ErrorKind::kEnumeration: return "enumeration";
    case ErrorKind::kGrid: return "grid";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when training produces a non-finite or exploding loss.
class TrainingError : public Error {
 public:
  TrainingError(long long step, const std::string& message)
      : Error(ErrorKind::kTraining, message + " at step " + std::to_string(step)),
        step_(step) {}

  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void Require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) Fail(kind, message);
}

}  // namespace unlearn
