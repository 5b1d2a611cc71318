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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "itoagc/conic.hpp"
#include "itoagc/disturbance.hpp"
#include "itoagc/grid.hpp"
#include "itoagc/saf.hpp"
#include "itoagc/scp.hpp"

namespace itoagc {

enum class ControllerKind { kScpAffine, kPI, kDC, kMPC, kSBSP };

std::string_view to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(std::string_view name);
/// Table label, e.g. "SCP-opt" or "SBSP(100)".
std::string display_name(ControllerKind kind, int n_scenarios = 0);

struct PiParams {
  /// One entry per control area (a single entry is broadcast).
  std::vector<double> kp;
  std::vector<double> ki;
};

struct MpcParams {
  int horizon_steps = 10;
  /// Shrink the prediction window so it never extends past the run horizon.
  bool shrinking = false;
};

struct SbspParams {
  int n_scenarios = 100;
  std::uint64_t seed = 0;
};

struct ControllerSpec {
  ControllerKind kind = ControllerKind::kPI;
  PiParams pi;
  MpcParams mpc;
  SbspParams sbsp;
  /// Precomputed policy of ScpAffine, DC and SBSP.
  AffinePolicy policy;

  void validate() const;
};

/// {"kind": "mpc", "horizon_steps": 10}, {"kind": "pi", "kp": [..], "ki": [..]},
/// {"kind": "sbsp", "scenarios": 100, "seed": 7}, {"kind": "scp"}, {"kind": "dc"}.
ControllerSpec controller_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ControllerSpec& spec);

/// Everything a controller may need besides its own parameters.
struct ControlContext {
  LinearSystem sys;
  DisturbanceBank bank;
  ConstraintSet cset;
  ObjectiveWeights weights;
  double dt_ctrl = 1.0;
  int n_steps = 100;
  SolverOptions solver;
};

/// Per-run controller instance. Holds the PI integrator and the MPC solver
/// workspace; never shared between runs.
class Controller {
 public:
  Controller(std::shared_ptr<const ControlContext> ctx, ControllerSpec spec);

  /// Control at step k (time k * dt_ctrl) given the measured x and z.
  Vector control_step(int k, const Vector& x, const Vector& z);
  void reset();

  const ControllerSpec& spec() const { return spec_; }
  /// Fallbacks and solver problems, one line each.
  const std::vector<std::string>& events() const { return events_; }
  /// Seconds spent inside optimization solves.
  double solve_seconds() const { return solve_seconds_; }

 private:
  Vector pi_step(const Vector& x, const Vector& z);
  Vector mpc_step(int k, const Vector& x, const Vector& z);

  std::shared_ptr<const ControlContext> ctx_;
  ControllerSpec spec_;
  Vector integrator_;
  Vector last_u_;
  InteriorPointBackend backend_;
  std::vector<std::string> events_;
  double solve_seconds_ = 0.0;
};

/// ACE of every area at (x, z); inputs do not enter the ACE.
Vector area_control_errors(const LinearSystem& sys, const Vector& x, const Vector& z);

struct PolicyDesign {
  Solution solution;
  ProblemSize size;
  double seconds = 0.0;  // assembly plus solve
};

/// SCP-opt policy for the run described by the context.
PolicyDesign design_scp(const ControlContext& ctx, const Vector& x0, const Vector& z0,
                        const ScpOptions& opts = {});
/// Open-loop deterministic policy along the drift flow.
PolicyDesign design_dc(const ControlContext& ctx, const Vector& x0, const Vector& z0);

/// Scenario program over n_scenarios sampled paths with a shared affine policy.
ConicProgram assemble_sbsp(const LinearSystem& sys, const DisturbanceBank& bank,
                           const ConstraintSet& cset, const ObjectiveWeights& w,
                           const Vector& x0, const Vector& z0, int n_scenarios,
                           std::uint64_t seed, double dt, int n_steps);
PolicyDesign design_sbsp(const ControlContext& ctx, const Vector& x0, const Vector& z0,
                         int n_scenarios, std::uint64_t seed);

/// Closed-loop system of a continuously updated PI controller: states
/// [x; integrators], no inputs, u = -(Kp ACE + Ki int ACE) shared by 1/R.
/// The returned matrix maps the augmented state and z to u.
struct PiClosedLoop {
  LinearSystem sys;
  Matrix u_of_state;  // N_u x (N_x + N_areas + N_z), acting on [x; I; z]
};
PiClosedLoop pi_closed_loop(const LinearSystem& sys, const PiParams& pi);

}  // namespace itoagc
