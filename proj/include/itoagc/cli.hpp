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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "itoagc/controllers.hpp"
#include "itoagc/disturbance.hpp"
#include "itoagc/grid.hpp"
#include "itoagc/montecarlo.hpp"

namespace itoagc {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitInfeasible = 2 };

struct PiTuning {
  std::vector<double> kp{0.03, 0.1, 0.3, 1.0, 3.0};
  std::vector<double> ki{0.0, 0.001, 0.01, 0.1};
  int scenarios = 50;
  std::uint64_t seed = 7;
};

struct McConfig {
  bool present = false;
  int scenarios = 1000;
  double dt_sim = 0.1;
  std::optional<std::uint64_t> seed;
};

struct FpCheckOptions {
  int grid_points = 50;
  double residual_tol = 1e-5;
  double fd_step = 1e-4;
  int paths = 10000;
  double dt = 0.01;
  /// Relaxation times simulated before the moments are read.
  double relaxation_times = 10.0;
  double moment_tol = 0.05;
  std::uint64_t seed = 1;
};

struct RunConfig {
  std::string case_path;
  /// Applied after loading: {"freq_hz": x, "wind_z0": [..]}.
  nlohmann::json case_overrides = nlohmann::json::object();
  ControllerSpec controller;
  bool controller_present = false;
  double dt_ctrl = 1.0;
  int n_steps = 100;
  double gamma = 0.95;
  ObjectiveWeights weights;
  McConfig mc;
  std::vector<ControllerSpec> compare;
  PiTuning pi_tuning;
  nlohmann::json fp_processes = nlohmann::json::array();
  FpCheckOptions fp;
  std::string output_dir = "out";
  /// Canonical dump of the source document and its hash.
  std::string canonical;
  std::string hash;
};

/// Parses and validates a run configuration; relative paths resolve against
/// `base_dir`, then against the bundled data directory.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Case with overrides applied.
GridCase load_configured_case(const RunConfig& cfg);
ControlContext make_context(const RunConfig& cfg, const GridCase& grid);

/// Replaces the file in one rename so readers never see partial output.
void write_atomic(const std::string& path, const std::string& contents);

struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool compare = false;
  std::optional<int> order;
};

struct FpCheckResult {
  std::string name;
  double max_residual = 0.0;
  double target_mean = 0.0;
  double target_variance = 0.0;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  bool residual_ok = false;
  bool moments_ok = false;
  bool passed() const { return residual_ok && moments_ok; }
};

/// Stationary Fokker-Planck residual on a grid around the bulk of `pdf`
/// plus a long-run ensemble moment check.
FpCheckResult fp_check(const std::string& name, const ItoProcess1D& proc, const ScalarFn& pdf,
                       const Moments& target, const FpCheckOptions& opts);
/// Process entry of the fp-check list: a process block with an optional
/// "diffusion_scale" factor. Named kinds use their closed-form density,
/// custom ones their tabulated pdf.
FpCheckResult fp_check_entry(const nlohmann::json& entry, const FpCheckOptions& opts);

int cmd_solve(const RunConfig& cfg, const CliOptions& opts, std::ostream& out,
              std::ostream& err);
int cmd_validate(const RunConfig& cfg, const CliOptions& opts, std::ostream& out,
                 std::ostream& err);
int cmd_fp_check(const RunConfig& cfg, const CliOptions& opts, std::ostream& out,
                 std::ostream& err);

/// Parses argv and dispatches: solve | validate | fp-check.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace itoagc
