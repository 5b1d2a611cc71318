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


#include "itoagc/controllers.hpp"

#include <chrono>
#include <cmath>

namespace itoagc {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Stream domain of SBSP training paths, disjoint from evaluation streams.
constexpr std::uint64_t kSbspStreamBase = 0x5b5b000000000000ULL;

double per_area(const std::vector<double>& v, int area) {
  return v.size() == 1 ? v[0] : v.at(area);
}

}  // namespace

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kScpAffine: return "scp";
    case ControllerKind::kPI: return "pi";
    case ControllerKind::kDC: return "dc";
    case ControllerKind::kMPC: return "mpc";
    case ControllerKind::kSBSP: return "sbsp";
  }
  return "unknown";
}

ControllerKind controller_kind_from_string(std::string_view name) {
  if (name == "scp" || name == "scp_affine" || name == "scp-opt") return ControllerKind::kScpAffine;
  if (name == "pi") return ControllerKind::kPI;
  if (name == "dc") return ControllerKind::kDC;
  if (name == "mpc") return ControllerKind::kMPC;
  if (name == "sbsp") return ControllerKind::kSBSP;
  throw Error(ErrorCode::kUnknownKind, "unknown controller kind '" + std::string(name) + "'");
}

std::string display_name(ControllerKind kind, int n_scenarios) {
  switch (kind) {
    case ControllerKind::kScpAffine: return "SCP-opt";
    case ControllerKind::kPI: return "PI";
    case ControllerKind::kDC: return "DC";
    case ControllerKind::kMPC: return "MPC";
    case ControllerKind::kSBSP: return "SBSP(" + std::to_string(n_scenarios) + ")";
  }
  return "unknown";
}

void ControllerSpec::validate() const {
  switch (kind) {
    case ControllerKind::kPI:
      require(!pi.kp.empty() && pi.kp.size() == pi.ki.size(), ErrorCode::kInvalidParameter,
              "PI needs matching kp and ki lists");
      for (std::size_t i = 0; i < pi.kp.size(); ++i) {
        require(std::isfinite(pi.kp[i]) && std::isfinite(pi.ki[i]), ErrorCode::kInvalidParameter,
                "PI gains must be finite");
      }
      break;
    case ControllerKind::kMPC:
      require(mpc.horizon_steps >= 1, ErrorCode::kInvalidParameter, "MPC horizon must be >= 1");
      break;
    case ControllerKind::kSBSP:
      require(sbsp.n_scenarios >= 1, ErrorCode::kInvalidParameter,
              "SBSP needs at least one scenario");
      break;
    case ControllerKind::kScpAffine:
    case ControllerKind::kDC:
      break;
  }
}

ControllerSpec controller_from_json(const nlohmann::json& doc) {
  require(doc.is_object() && doc.contains("kind") && doc.at("kind").is_string(),
          ErrorCode::kParseError, "controller: expected an object with a string 'kind'");
  ControllerSpec spec;
  spec.kind = controller_kind_from_string(doc.at("kind").get<std::string>());
  auto list = [&](const char* key) {
    std::vector<double> out;
    if (!doc.contains(key)) return out;
    const auto& v = doc.at(key);
    if (v.is_number()) return std::vector<double>{v.get<double>()};
    require(v.is_array(), ErrorCode::kParseError,
            std::string("controller.") + key + ": expected a number or an array");
    for (const auto& e : v) {
      require(e.is_number(), ErrorCode::kParseError,
              std::string("controller.") + key + ": expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  };
  try {
    spec.pi.kp = list("kp");
    spec.pi.ki = list("ki");
    if (doc.contains("horizon_steps")) spec.mpc.horizon_steps = doc.at("horizon_steps").get<int>();
    if (doc.contains("shrinking")) spec.mpc.shrinking = doc.at("shrinking").get<bool>();
    if (doc.contains("scenarios")) spec.sbsp.n_scenarios = doc.at("scenarios").get<int>();
    if (doc.contains("seed")) spec.sbsp.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("controller: ") + e.what());
  }
  if (spec.kind != ControllerKind::kPI || !spec.pi.kp.empty()) spec.validate();
  return spec;
}

nlohmann::json to_json(const ControllerSpec& spec) {
  nlohmann::json j = {{"kind", std::string(to_string(spec.kind))}};
  switch (spec.kind) {
    case ControllerKind::kPI:
      j["kp"] = spec.pi.kp;
      j["ki"] = spec.pi.ki;
      break;
    case ControllerKind::kMPC:
      j["horizon_steps"] = spec.mpc.horizon_steps;
      j["shrinking"] = spec.mpc.shrinking;
      break;
    case ControllerKind::kSBSP:
      j["scenarios"] = spec.sbsp.n_scenarios;
      j["seed"] = spec.sbsp.seed;
      break;
    default:
      break;
  }
  return j;
}

Vector area_control_errors(const LinearSystem& sys, const Vector& x, const Vector& z) {
  const Vector s = sys.stack(x, Vector::Zero(sys.nu()), z);
  Vector ace(static_cast<Eigen::Index>(sys.ace_rows.size()));
  for (std::size_t a = 0; a < sys.ace_rows.size(); ++a) ace(a) = sys.ace_rows[a].dot(s);
  return ace;
}

Controller::Controller(std::shared_ptr<const ControlContext> ctx, ControllerSpec spec)
    : ctx_(std::move(ctx)), spec_(std::move(spec)) {
  require(ctx_ != nullptr, ErrorCode::kInvalidParameter, "controller needs a context");
  spec_.validate();
  const auto& sys = ctx_->sys;
  if (spec_.kind == ControllerKind::kPI) {
    const auto na = sys.ace_rows.size();
    require(spec_.pi.kp.size() == 1 || spec_.pi.kp.size() == na, ErrorCode::kDimensionMismatch,
            "PI gains must be given once or per area");
  }
  if (spec_.kind == ControllerKind::kScpAffine || spec_.kind == ControllerKind::kDC ||
      spec_.kind == ControllerKind::kSBSP) {
    require(spec_.policy.horizon() >= 1, ErrorCode::kInvalidParameter,
            std::string(to_string(spec_.kind)) + " controller needs a precomputed policy");
    spec_.policy.validate(spec_.policy.horizon(), sys.nu(), sys.nz());
  }
  reset();
}

void Controller::reset() {
  integrator_ = Vector::Zero(static_cast<Eigen::Index>(ctx_->sys.ace_rows.size()));
  last_u_ = Vector::Zero(ctx_->sys.nu());
  events_.clear();
  solve_seconds_ = 0.0;
}

Vector Controller::control_step(int k, const Vector& x, const Vector& z) {
  Vector u;
  switch (spec_.kind) {
    case ControllerKind::kScpAffine:
    case ControllerKind::kDC:
    case ControllerKind::kSBSP:
      u = spec_.policy.control(k, z);
      break;
    case ControllerKind::kPI:
      u = pi_step(x, z);
      break;
    case ControllerKind::kMPC:
      u = mpc_step(k, x, z);
      break;
  }
  last_u_ = u;
  return u;
}

Vector Controller::pi_step(const Vector& x, const Vector& z) {
  const auto& sys = ctx_->sys;
  const Vector ace = area_control_errors(sys, x, z);
  Vector u(sys.nu());
  for (int i = 0; i < sys.nu(); ++i) {
    const int a = sys.input_area[i];
    u(i) = -sys.input_share(i) *
           (per_area(spec_.pi.kp, a) * ace(a) + per_area(spec_.pi.ki, a) * integrator_(a));
  }
  integrator_ += ctx_->dt_ctrl * ace;
  return u;
}

Vector Controller::mpc_step(int k, const Vector& x, const Vector& z) {
  const auto& c = *ctx_;
  int n = spec_.mpc.horizon_steps;
  if (spec_.mpc.shrinking) n = std::max(1, std::min(n, c.n_steps - k));
  const auto t0 = std::chrono::steady_clock::now();
  const ConicProgram prog =
      assemble_deterministic(c.sys, c.bank, c.cset, c.weights, x, z, c.dt_ctrl, n);
  const Solution sol = solve(prog, backend_, c.solver);
  solve_seconds_ += seconds_since(t0);
  if (!sol.optimal()) {
    events_.push_back("step " + std::to_string(k) + ": mpc " +
                      std::string(to_string(sol.status)) + ", holding previous input");
    return last_u_;
  }
  return sol.policy.U0.row(0).transpose();
}

PolicyDesign design_scp(const ControlContext& ctx, const Vector& x0, const Vector& z0,
                        const ScpOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const ConicProgram prog = assemble_scp(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x0, z0,
                                         ctx.dt_ctrl, ctx.n_steps, opts);
  InteriorPointBackend ipm;
  PolicyDesign d;
  d.solution = solve(prog, ipm, ctx.solver);
  d.size = count_problem_size(prog);
  d.seconds = seconds_since(t0);
  return d;
}

PolicyDesign design_dc(const ControlContext& ctx, const Vector& x0, const Vector& z0) {
  const auto t0 = std::chrono::steady_clock::now();
  const ConicProgram prog = assemble_deterministic(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x0,
                                                   z0, ctx.dt_ctrl, ctx.n_steps);
  InteriorPointBackend ipm;
  PolicyDesign d;
  d.solution = solve(prog, ipm, ctx.solver);
  d.size = count_problem_size(prog);
  d.seconds = seconds_since(t0);
  return d;
}

ConicProgram assemble_sbsp(const LinearSystem& sys, const DisturbanceBank& bank,
                           const ConstraintSet& cset, const ObjectiveWeights& w,
                           const Vector& x0, const Vector& z0, int n_scenarios,
                           std::uint64_t seed, double dt, int n_steps) {
  require(n_scenarios >= 1, ErrorCode::kInvalidParameter, "SBSP needs at least one scenario");
  require(bank.size() == sys.nz() && z0.size() == sys.nz(), ErrorCode::kDimensionMismatch,
          "disturbance bank does not match the system");
  std::vector<Matrix> paths;
  paths.reserve(n_scenarios);
  const int nz = sys.nz();
  for (int s = 0; s < n_scenarios; ++s) {
    Matrix p(n_steps + 1, nz);
    for (int j = 0; j < nz; ++j) {
      const auto stream = kSbspStreamBase + static_cast<std::uint64_t>(s) * nz + j;
      const SamplePath path = sample_path(bank.process(j), z0(j), dt, n_steps, seed, stream);
      for (int k = 0; k <= n_steps; ++k) p(k, j) = path.values[k];
    }
    paths.push_back(std::move(p));
  }
  ScpOptions opts;
  opts.include_gain = true;
  ConicProgram prog = assemble_scenario_program(sys, cset, w, x0, paths, dt, n_steps, opts);
  prog.kind = "sbsp";
  return prog;
}

PolicyDesign design_sbsp(const ControlContext& ctx, const Vector& x0, const Vector& z0,
                         int n_scenarios, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const ConicProgram prog = assemble_sbsp(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x0, z0,
                                          n_scenarios, seed, ctx.dt_ctrl, ctx.n_steps);
  InteriorPointBackend ipm;
  PolicyDesign d;
  d.solution = solve(prog, ipm, ctx.solver);
  d.size = count_problem_size(prog);
  d.seconds = seconds_since(t0);
  return d;
}

PiClosedLoop pi_closed_loop(const LinearSystem& sys, const PiParams& pi) {
  const int nx = sys.nx();
  const int nu = sys.nu();
  const int nz = sys.nz();
  const int na = static_cast<int>(sys.ace_rows.size());
  require(!pi.kp.empty() && pi.kp.size() == pi.ki.size() &&
              (pi.kp.size() == 1 || static_cast<int>(pi.kp.size()) == na),
          ErrorCode::kDimensionMismatch, "PI gains must be given once or per area");
  Matrix ax(na, nx);
  Matrix az(na, nz);
  for (int a = 0; a < na; ++a) {
    const RowVector& r = sys.ace_rows[a];
    ax.row(a) = r.segment(sys.x_offset(), nx);
    az.row(a) = r.segment(sys.z_offset(), nz);
  }
  // u = -share * (Kp ACE + Ki I), ACE = ax x + az z.
  Matrix kp = Matrix::Zero(nu, na);
  Matrix ki = Matrix::Zero(nu, na);
  for (int i = 0; i < nu; ++i) {
    const int a = sys.input_area[i];
    kp(i, a) = sys.input_share(i) * per_area(pi.kp, a);
    ki(i, a) = sys.input_share(i) * per_area(pi.ki, a);
  }
  PiClosedLoop cl;
  cl.u_of_state.resize(nu, nx + na + nz);
  cl.u_of_state << -kp * ax, -ki, -kp * az;

  LinearSystem& out = cl.sys;
  out.A.resize(nx + na, nx + na);
  out.A << sys.A - sys.B * kp * ax, -sys.B * ki, ax, Matrix::Zero(na, na);
  out.B = Matrix::Zero(nx + na, 0);
  out.C.resize(nx + na, nz);
  out.C << sys.C - sys.B * kp * az, az;
  out.state_labels = sys.state_labels;
  for (int a = 0; a < na; ++a) out.state_labels.push_back("int_ace_" + std::to_string(sys.area_ids[a]));
  auto lift = [&](const RowVector& r) {
    RowVector o = RowVector::Zero(nx + na + nz);
    o.head(nx) = r.segment(sys.x_offset(), nx);
    o.tail(nz) = r.segment(sys.z_offset(), nz);
    return o;
  };
  out.freq_row = lift(sys.freq_row);
  for (const auto& r : sys.ace_rows) out.ace_rows.push_back(lift(r));
  out.area_ids = sys.area_ids;
  out.input_share = Vector::Zero(0);
  return cl;
}

}  // namespace itoagc
