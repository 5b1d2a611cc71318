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

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "itoagc/common.hpp"
#include "itoagc/disturbance.hpp"

namespace itoagc {

struct Generator {
  int bus = 0;
  double H = 0.0;  // s
  double D = 0.0;  // pu
  double R = 0.0;  // pu
  double p_max = kInf;
  int area = 1;
};

/// Bus without a rotating mass. Its frequency is algebraic:
/// 0 = D * omega + sum of outgoing flows.
struct LoadBus {
  int bus = 0;
  double D = 1.0;
  int area = 1;
};

struct Line {
  int id = 0;
  int from = 0;
  int to = 0;
  double x = 0.0;
  double v_from = 1.0;
  double v_to = 1.0;
  double theta_from = 0.0;
  double theta_to = 0.0;
  double p_max = kInf;

  /// |V_i||V_j| / x * cos(theta_i - theta_j).
  double susceptance() const;
};

struct Area {
  int id = 1;
  /// Frequency bias b_m in pu/Hz (negative by convention).
  double bias = 0.0;
  std::vector<int> tie_lines;
};

struct WindSource {
  ItoProcess1D process;
  int bus = 0;
  double z0 = 0.0;
};

struct GridCase {
  std::string name;
  double base_mva = 100.0;
  double nominal_freq = 50.0;
  double freq_limit = kInf;  // Hz
  std::vector<Generator> generators;
  std::vector<LoadBus> load_buses;
  std::vector<Line> lines;
  std::vector<Area> areas;
  std::vector<WindSource> wind;

  DisturbanceBank disturbance_bank() const;
  int generator_index(int bus) const;  // -1 when absent
  int line_index(int id) const;        // -1 when absent
  int bus_area(int bus) const;         // -1 when absent
  /// Throws validation-error on the first violated invariant.
  void validate() const;
};

/// Parses and validates a case document.
GridCase case_from_json(const nlohmann::json& doc);
/// Reads a case file; parse errors carry line/field diagnostics.
GridCase load_case(const std::string& path);
/// Resolves a bundled case name ("toy3.json") against the data directory.
std::string data_path(const std::string& name);

/// Stacked vector S = [X; U; Z].
struct LinearSystem {
  Matrix A;
  Matrix B;
  Matrix C;
  std::vector<std::string> state_labels;
  RowVector freq_row;
  std::vector<RowVector> ace_rows;
  std::vector<int> area_ids;
  /// Area index (into ace_rows) of each input, and its PI participation factor.
  std::vector<int> input_area;
  Vector input_share;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  int nz() const { return static_cast<int>(C.cols()); }
  int ns() const { return nx() + nu() + nz(); }
  int x_offset() const { return 0; }
  int u_offset() const { return nx(); }
  int z_offset() const { return nx() + nu(); }
  /// [X; U; Z] for the given blocks.
  Vector stack(const Vector& x, const Vector& u, const Vector& z) const;
  /// Right-hand side A x + B u + C z.
  Vector rhs(const Vector& x, const Vector& u, const Vector& z) const;
};

LinearSystem build_linear_system(const GridCase& grid);

struct FlowConsistency {
  bool consistent = false;
  double residual = 0.0;
  Vector theta;
};

/// Checks whether P0 = B (theta_from - theta_to) has a solution.
FlowConsistency validate_initial_flows(const GridCase& grid, const Vector& p0);

struct ConstraintRow {
  RowVector phi;
  double bound = 0.0;
  std::string label;
};

struct ConstraintSet {
  std::vector<ConstraintRow> rows;
  double gamma = 0.95;
  double kappa = 0.0;

  int size() const { return static_cast<int>(rows.size()); }
};

double kappa_from_gamma(double gamma);

/// Two rows (+/-) per finite generator, line and frequency limit.
ConstraintSet build_constraints(const GridCase& grid, const LinearSystem& sys,
                                double gamma);
ConstraintSet build_constraints(const GridCase& grid, double gamma);

}  // namespace itoagc
