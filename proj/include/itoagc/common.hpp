// Copyright 2026 The itoagc Authors
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

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace itoagc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorCode {
  kInvalidParameter,
  kUnknownKind,
  kNegativeDiffusion,
  kNonpositiveDensity,
  kOutOfSupport,
  kParseError,
  kValidationError,
  kDimensionMismatch,
  kSolverFailure,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable category next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Closed interval, either end possibly infinite.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double z) const { return z >= lo && z <= hi; }
  bool bounded_below() const { return std::isfinite(lo); }
  bool bounded_above() const { return std::isfinite(hi); }
  double clamp(double z) const { return z < lo ? lo : (z > hi ? hi : z); }
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

}  // namespace itoagc
