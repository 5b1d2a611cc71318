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
#include <string>
#include <vector>

#include "itoagc/controllers.hpp"
#include "itoagc/disturbance.hpp"
#include "itoagc/grid.hpp"
#include "itoagc/saf.hpp"

namespace itoagc {

/// Disturbance ensemble on the simulation grid. Scenario s, source j uses
/// counter stream s * N_z + j, so any subset can be regenerated alone.
struct ScenarioSet {
  double dt_sim = 0.0;
  int steps = 0;
  std::uint64_t seed = 0;
  /// paths[s][j] is source j of scenario s.
  std::vector<std::vector<SamplePath>> paths;

  int size() const { return static_cast<int>(paths.size()); }
  int n_sources() const { return paths.empty() ? 0 : static_cast<int>(paths.front().size()); }
  /// (steps+1) x N_z matrix of scenario s.
  Matrix path_matrix(int s) const;
};

ScenarioSet generate_scenarios(const DisturbanceBank& bank, int n_scenarios, double horizon,
                               double dt_sim, std::uint64_t seed);

/// Fine-grid record of one closed-loop run. Row j is time j * dt_sim; the
/// input row is the held control over [t_j, t_{j+1}) and the last row repeats it.
struct ClosedLoopTrajectory {
  double dt_sim = 0.0;
  Matrix X;
  Matrix U;
  Matrix Z;
  Vector freq;  // Hz
  Matrix ace;   // one column per area
  bool diverged = false;
  double divergence_time = kInf;

  int steps() const { return static_cast<int>(X.rows()) - 1; }
  /// Stacked [x; u; z] at fine step j.
  Vector stacked(int j) const;
};

/// |freq| beyond this many Hz marks a run as diverged.
inline constexpr double kDivergenceHz = 1e3;

/// Forward Euler at dt_sim with the controller sampled every dt_ctrl / dt_sim
/// fine steps over ctx.n_steps control steps. The controller is reset first.
ClosedLoopTrajectory simulate_closed_loop(const ControlContext& ctx, Controller& controller,
                                          const Vector& x0, const Matrix& z_path,
                                          double dt_sim);

struct ScenarioOutcome {
  double objective = 0.0;  // +inf when diverged
  bool violated = false;
  bool diverged = false;
  double divergence_time = kInf;
};

/// Objective by left Riemann sums on the fine grid plus the terminal term;
/// violation when any limit row is exceeded at any fine step.
ScenarioOutcome evaluate_trajectory(const ClosedLoopTrajectory& traj, const LinearSystem& sys,
                                    const ObjectiveWeights& w, const ConstraintSet& cset);

struct RunMetrics {
  std::string controller;
  int n_scenarios = 0;
  double dt_sim = 0.0;
  double objective_mean = 0.0;
  double objective_stderr = 0.0;
  std::vector<double> objective_per_scenario;
  double violation_rate = 0.0;
  int n_diverged = 0;
  double first_divergence_time = kInf;
  /// Per fine step: E[df], E[df^2] and the standard error of E[df^2].
  Vector freq_mean_curve;
  Vector freq_sq_mean_curve;
  Vector freq_sq_stderr;
  /// Seconds spent in controller optimization, averaged per scenario.
  double solve_seconds_per_run = 0.0;
  /// Policy design time, when the controller has one.
  double design_seconds = 0.0;
  double wall_time = 0.0;
  std::vector<std::string> events;
};

/// Reduces per-scenario outcomes and fine-grid frequencies into run metrics.
RunMetrics reduce_metrics(const std::vector<ScenarioOutcome>& outcomes,
                          const std::vector<Vector>& freq_paths, double dt_sim);

/// Closed-loop runs of one controller over every scenario.
RunMetrics run_monte_carlo(const ControlContext& ctx, const ControllerSpec& spec,
                           const Vector& x0, const ScenarioSet& scenarios);

/// Builds a ready-to-run spec (designs the policy where needed). When the
/// design is not optimal the spec carries no policy and ready() is false.
struct PreparedController {
  ControllerSpec spec;
  PolicyDesign design;  // empty for PI and MPC
  bool has_design = false;
  bool ready() const { return !has_design || design.solution.optimal(); }
};
PreparedController prepare_controller(const ControlContext& ctx, ControllerSpec spec,
                                      const Vector& x0, const Vector& z0);

/// Metrics to CSV columns: t, freq_mean, freq_sq_mean, freq_sq_stderr.
std::string metrics_csv(const RunMetrics& m);
nlohmann::json metrics_summary(const RunMetrics& m);

struct PiSearchPoint {
  double kp = 0.0;
  double ki = 0.0;
  double objective = 0.0;
  bool diverged = false;
  double divergence_time = kInf;
};

struct PiSearchResult {
  PiParams best;
  PiSearchPoint best_point;
  std::vector<PiSearchPoint> table;
  /// Set when every grid point diverges.
  std::string warning;
};

/// Exhaustive search over broadcast (Kp, Ki) pairs by mean objective on the
/// tuning scenarios. Stable points beat diverged ones; among diverged points
/// the latest divergence wins; ties go to the smallest (Kp, Ki).
PiSearchResult grid_search_pi(const ControlContext& ctx, const Vector& x0,
                              const ScenarioSet& scenarios, const std::vector<double>& kp_grid,
                              const std::vector<double>& ki_grid);

/// Per-step comparison of E[df^2] by Monte Carlo and by the SAF at orders 0
/// and 1, on one shared Euler grid with u_k = U0_k + F1^T z_k.
struct SafMcReport {
  Vector t;
  Vector mc_mean;      // E[df]
  Vector mc_sq_mean;   // E[df^2]
  Vector mc_sq_stderr;
  Vector mc_variance;  // sample variance of df
  Vector order0;
  Vector order1;

  /// (analytic - MC) / standard error; 0 where the standard error vanishes
  /// and the values agree.
  Vector z_scores(int order) const;
  /// Fraction of steps whose curve lies inside the 95% normal CI.
  double fraction_inside_ci(int order, int first_step = 1) const;
};

SafMcReport compare_saf_vs_mc(const LinearSystem& sys, const DisturbanceBank& bank,
                              const AffinePolicy& policy, const Vector& x0, double dt,
                              int n_steps, int n_scenarios, std::uint64_t seed);

std::string report_csv(const SafMcReport& r);

}  // namespace itoagc
