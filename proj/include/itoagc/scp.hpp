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

#include <string>
#include <vector>

#include "itoagc/conic.hpp"
#include "itoagc/disturbance.hpp"
#include "itoagc/grid.hpp"
#include "itoagc/saf.hpp"

namespace itoagc {

/// Weights of lambda ACE^2 + U^T Lambda U (running) and mu ACE_T^2 (terminal).
struct ObjectiveWeights {
  double lambda_ace = 1e4;
  /// Empty means 7e4 * I.
  Matrix lambda_u;
  double mu_ace = 5e4;
  /// Area id of the penalized ACE; 0 selects the first area.
  int area = 0;

  int area_index(const LinearSystem& sys) const;
  Matrix control_weight(int nu) const;
  QuadraticFunctional running(const LinearSystem& sys) const;
  QuadraticFunctional terminal(const LinearSystem& sys) const;
  void validate(int nu) const;
};

struct ScpOptions {
  /// One F1 per control step instead of a single gain.
  bool per_step_gain = false;
  /// Keep F1 decision variables in deterministic programs.
  bool include_gain = false;
};

/// Chance-constrained first-order program over N_t Euler steps with affine
/// disturbance feedback u_k = U0_k + F1^T z_k.
ConicProgram assemble_scp(const LinearSystem& sys, const DisturbanceBank& bank,
                          const ConstraintSet& cset, const ObjectiveWeights& w,
                          const Vector& x0, const Vector& z0, double dt, int n_steps,
                          const ScpOptions& opts = {});

/// Noise-free program along the drift flow of z (hard limits, no sensitivities).
ConicProgram assemble_deterministic(const LinearSystem& sys, const DisturbanceBank& bank,
                                    const ConstraintSet& cset, const ObjectiveWeights& w,
                                    const Vector& x0, const Vector& z0, double dt,
                                    int n_steps, const ScpOptions& opts = {});

/// Scenario-average program with hard limits per scenario and a shared
/// policy. Each path is (N_t+1) x N_z on the control grid.
ConicProgram assemble_scenario_program(const LinearSystem& sys, const ConstraintSet& cset,
                                       const ObjectiveWeights& w, const Vector& x0,
                                       const std::vector<Matrix>& z_paths, double dt,
                                       int n_steps, const ScpOptions& opts = {});

/// Drift flow z_{k+1} = z_k + dt mu(z_k), k = 0..N_t.
Matrix drift_flow(const DisturbanceBank& bank, const Vector& z0, double dt, int n_steps);

struct ProblemSize {
  /// Table-accounted variables (states, sensitivities, variance epigraphs).
  int n_vars = 0;
  /// Policy variables (U0, F1).
  int n_policy = 0;
  /// Auxiliary variables introduced by the conic lowering.
  int n_auxiliary = 0;
  /// Dynamics and sensitivity equalities.
  int n_eq = 0;
  /// Limit rows (hard or chance-constrained).
  int n_soc = 0;
  /// Variance and objective epigraph rows.
  int n_epigraph = 0;
  int n_constraints() const { return n_eq + n_soc + n_epigraph; }
};

ProblemSize count_problem_size(const ConicProgram& prog);
nlohmann::json to_json(const ProblemSize& size);

struct Solution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  double objective = 0.0;
  AffinePolicy policy;
  Vector x;
  Vector y;
  Vector z;
  ConstraintViolation violation;
  int iterations = 0;
  double seconds = 0.0;
  std::string message;

  bool optimal() const { return status == SolveStatus::kOptimal; }
};

/// Violation threshold applied when re-substituting an optimal point.
inline constexpr double kResubstitutionTol = 1e-6;

/// Solves the program; an optimal point that fails re-substitution is
/// reported as a numerical failure.
Solution solve(const ConicProgram& prog, ConicBackend& backend, const SolverOptions& opts = {});

AffinePolicy extract_policy(const ConicProgram& prog, const Vector& x);

}  // namespace itoagc
