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


#include "itoagc/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <tuple>

namespace itoagc {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int substeps(double dt_ctrl, double dt_sim) {
  require(dt_sim > 0.0 && dt_sim <= dt_ctrl * (1 + 1e-12), ErrorCode::kInvalidParameter,
          "dt_sim must lie in (0, dt_ctrl]");
  const double ratio = dt_ctrl / dt_sim;
  const long r = std::lround(ratio);
  require(std::abs(ratio - static_cast<double>(r)) < 1e-9 * ratio, ErrorCode::kInvalidParameter,
          "dt_sim must divide dt_ctrl");
  return static_cast<int>(r);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Matrix ScenarioSet::path_matrix(int s) const {
  const auto& src = paths.at(s);
  Matrix m(steps + 1, static_cast<Eigen::Index>(src.size()));
  for (std::size_t j = 0; j < src.size(); ++j) {
    for (int k = 0; k <= steps; ++k) m(k, j) = src[j].values[k];
  }
  return m;
}

ScenarioSet generate_scenarios(const DisturbanceBank& bank, int n_scenarios, double horizon,
                               double dt_sim, std::uint64_t seed) {
  require(n_scenarios >= 1, ErrorCode::kInvalidParameter, "need at least one scenario");
  require(dt_sim > 0.0 && horizon > 0.0, ErrorCode::kInvalidParameter,
          "horizon and dt_sim must be positive");
  const double ratio = horizon / dt_sim;
  const long steps = std::lround(ratio);
  require(std::abs(ratio - static_cast<double>(steps)) < 1e-9 * ratio,
          ErrorCode::kInvalidParameter, "dt_sim must divide the horizon");
  ScenarioSet set;
  set.dt_sim = dt_sim;
  set.steps = static_cast<int>(steps);
  set.seed = seed;
  const int nz = bank.size();
  set.paths.resize(n_scenarios);
  for (int s = 0; s < n_scenarios; ++s) {
    set.paths[s].reserve(nz);
    for (int j = 0; j < nz; ++j) {
      const auto stream = static_cast<std::uint64_t>(s) * nz + j;
      set.paths[s].push_back(
          sample_path(bank.process(j), bank.z0()(j), dt_sim, set.steps, seed, stream));
    }
  }
  return set;
}

Vector ClosedLoopTrajectory::stacked(int j) const {
  Vector s(X.cols() + U.cols() + Z.cols());
  s << X.row(j).transpose(), U.row(j).transpose(), Z.row(j).transpose();
  return s;
}

ClosedLoopTrajectory simulate_closed_loop(const ControlContext& ctx, Controller& controller,
                                          const Vector& x0, const Matrix& z_path,
                                          double dt_sim) {
  const auto& sys = ctx.sys;
  const int r = substeps(ctx.dt_ctrl, dt_sim);
  const int n = ctx.n_steps * r;
  require(x0.size() == sys.nx(), ErrorCode::kDimensionMismatch, "x0 does not match the system");
  require(z_path.rows() >= n + 1 && z_path.cols() == sys.nz(), ErrorCode::kDimensionMismatch,
          "scenario path is shorter than the run or has the wrong width");
  controller.reset();
  ClosedLoopTrajectory t;
  t.dt_sim = dt_sim;
  t.X.resize(n + 1, sys.nx());
  t.U.resize(n + 1, sys.nu());
  t.Z = z_path.topRows(n + 1);
  t.freq.resize(n + 1);
  t.ace.resize(n + 1, static_cast<Eigen::Index>(sys.ace_rows.size()));
  Vector x = x0;
  Vector u = Vector::Zero(sys.nu());
  int j = 0;
  for (; j <= n; ++j) {
    const Vector z = z_path.row(j).transpose();
    if (j < n && j % r == 0) u = controller.control_step(j / r, x, z);
    t.X.row(j) = x.transpose();
    t.U.row(j) = u.transpose();
    const Vector s = sys.stack(x, u, z);
    t.freq(j) = sys.freq_row.dot(s);
    for (std::size_t a = 0; a < sys.ace_rows.size(); ++a) t.ace(j, a) = sys.ace_rows[a].dot(s);
    if (!std::isfinite(t.freq(j)) || std::abs(t.freq(j)) > kDivergenceHz || !x.allFinite()) {
      t.diverged = true;
      t.divergence_time = j * dt_sim;
      break;
    }
    if (j < n) x += dt_sim * sys.rhs(x, u, z);
  }
  // Hold the last recorded row after a divergence.
  for (int i = j + 1; i <= n; ++i) {
    t.X.row(i) = t.X.row(j);
    t.U.row(i) = t.U.row(j);
    t.freq(i) = t.freq(j);
    t.ace.row(i) = t.ace.row(j);
  }
  return t;
}

ScenarioOutcome evaluate_trajectory(const ClosedLoopTrajectory& traj, const LinearSystem& sys,
                                    const ObjectiveWeights& w, const ConstraintSet& cset) {
  ScenarioOutcome out;
  out.diverged = traj.diverged;
  out.divergence_time = traj.divergence_time;
  if (traj.diverged) {
    out.objective = kInf;
    out.violated = true;
    return out;
  }
  const QuadraticFunctional f = w.running(sys);
  const QuadraticFunctional g = w.terminal(sys);
  const int n = traj.steps();
  for (int j = 0; j <= n; ++j) {
    const Vector s = traj.stacked(j);
    if (j < n) out.objective += traj.dt_sim * f(s);
    else out.objective += g(s);
    for (const auto& row : cset.rows) {
      if (row.phi.dot(s) > row.bound) out.violated = true;
    }
  }
  return out;
}

RunMetrics reduce_metrics(const std::vector<ScenarioOutcome>& outcomes,
                          const std::vector<Vector>& freq_paths, double dt_sim) {
  require(!outcomes.empty() && outcomes.size() == freq_paths.size(),
          ErrorCode::kDimensionMismatch, "metrics need one frequency path per outcome");
  RunMetrics m;
  m.dt_sim = dt_sim;
  const int ns = static_cast<int>(outcomes.size());
  m.n_scenarios = ns;
  int violations = 0;
  double sum = 0.0;
  for (const auto& o : outcomes) {
    m.objective_per_scenario.push_back(o.objective);
    sum += o.objective;
    if (o.violated) ++violations;
    if (o.diverged) {
      ++m.n_diverged;
      m.first_divergence_time = std::min(m.first_divergence_time, o.divergence_time);
    }
  }
  m.objective_mean = sum / ns;
  m.violation_rate = static_cast<double>(violations) / ns;
  if (ns > 1 && std::isfinite(m.objective_mean)) {
    double ss = 0.0;
    for (double v : m.objective_per_scenario) ss += (v - m.objective_mean) * (v - m.objective_mean);
    m.objective_stderr = std::sqrt(ss / (ns - 1) / ns);
  }
  const auto len = freq_paths.front().size();
  m.freq_mean_curve = Vector::Zero(len);
  m.freq_sq_mean_curve = Vector::Zero(len);
  for (const auto& f : freq_paths) {
    require(f.size() == len, ErrorCode::kDimensionMismatch, "frequency paths differ in length");
    m.freq_mean_curve += f;
    m.freq_sq_mean_curve += f.cwiseAbs2();
  }
  m.freq_mean_curve /= ns;
  m.freq_sq_mean_curve /= ns;
  m.freq_sq_stderr = Vector::Zero(len);
  if (ns > 1) {
    for (const auto& f : freq_paths) {
      m.freq_sq_stderr += (f.cwiseAbs2() - m.freq_sq_mean_curve).cwiseAbs2();
    }
    m.freq_sq_stderr = (m.freq_sq_stderr / ((ns - 1.0) * ns)).cwiseSqrt();
  }
  return m;
}

RunMetrics run_monte_carlo(const ControlContext& ctx, const ControllerSpec& spec,
                           const Vector& x0, const ScenarioSet& scenarios) {
  const auto t0 = std::chrono::steady_clock::now();
  auto shared = std::make_shared<const ControlContext>(ctx);
  Controller controller(shared, spec);
  std::vector<ScenarioOutcome> outcomes;
  std::vector<Vector> freq;
  outcomes.reserve(scenarios.size());
  freq.reserve(scenarios.size());
  double solve_seconds = 0.0;
  std::vector<std::string> events;
  for (int s = 0; s < scenarios.size(); ++s) {
    ClosedLoopTrajectory traj;
    try {
      traj = simulate_closed_loop(ctx, controller, x0, scenarios.path_matrix(s), scenarios.dt_sim);
    } catch (const Error& e) {
      throw Error(e.code(), "scenario " + std::to_string(s) + ": " + e.what());
    }
    solve_seconds += controller.solve_seconds();
    for (const auto& ev : controller.events()) events.push_back("scenario " + std::to_string(s) + ", " + ev);
    outcomes.push_back(evaluate_trajectory(traj, ctx.sys, ctx.weights, ctx.cset));
    freq.push_back(std::move(traj.freq));
  }
  RunMetrics m = reduce_metrics(outcomes, freq, scenarios.dt_sim);
  m.controller = display_name(spec.kind, spec.sbsp.n_scenarios);
  m.solve_seconds_per_run = solve_seconds / scenarios.size();
  m.events = std::move(events);
  m.wall_time = seconds_since(t0);
  return m;
}

PreparedController prepare_controller(const ControlContext& ctx, ControllerSpec spec,
                                      const Vector& x0, const Vector& z0) {
  PreparedController p;
  switch (spec.kind) {
    case ControllerKind::kScpAffine:
      p.design = design_scp(ctx, x0, z0);
      p.has_design = true;
      break;
    case ControllerKind::kDC:
      p.design = design_dc(ctx, x0, z0);
      p.has_design = true;
      break;
    case ControllerKind::kSBSP:
      p.design = design_sbsp(ctx, x0, z0, spec.sbsp.n_scenarios, spec.sbsp.seed);
      p.has_design = true;
      break;
    case ControllerKind::kPI:
      require(!spec.pi.kp.empty(), ErrorCode::kInvalidParameter, "PI controller needs kp and ki");
      break;
    case ControllerKind::kMPC:
      break;
  }
  if (p.has_design && p.design.solution.optimal()) spec.policy = p.design.solution.policy;
  spec.validate();
  p.spec = std::move(spec);
  return p;
}

std::string metrics_csv(const RunMetrics& m) {
  std::ostringstream os;
  os << "t,freq_mean,freq_sq_mean,freq_sq_stderr\n";
  for (Eigen::Index j = 0; j < m.freq_mean_curve.size(); ++j) {
    os << fmt(j * m.dt_sim) << ',' << fmt(m.freq_mean_curve(j)) << ','
       << fmt(m.freq_sq_mean_curve(j)) << ',' << fmt(m.freq_sq_stderr(j)) << '\n';
  }
  return os.str();
}

nlohmann::json metrics_summary(const RunMetrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"controller", m.controller},
          {"n_scenarios", m.n_scenarios},
          {"objective_mean", num(m.objective_mean)},
          {"objective_stderr", num(m.objective_stderr)},
          {"violation_rate", m.violation_rate},
          {"n_diverged", m.n_diverged},
          {"design_seconds", m.design_seconds},
          {"solve_seconds_per_run", m.solve_seconds_per_run},
          {"wall_time", m.wall_time},
          {"events", m.events.size()}};
}

PiSearchResult grid_search_pi(const ControlContext& ctx, const Vector& x0,
                              const ScenarioSet& scenarios, const std::vector<double>& kp_grid,
                              const std::vector<double>& ki_grid) {
  require(!kp_grid.empty() && !ki_grid.empty(), ErrorCode::kInvalidParameter,
          "PI grid search needs nonempty grids");
  PiSearchResult res;
  for (double kp : kp_grid) {
    for (double ki : ki_grid) {
      ControllerSpec spec;
      spec.kind = ControllerKind::kPI;
      spec.pi.kp = {kp};
      spec.pi.ki = {ki};
      const RunMetrics m = run_monte_carlo(ctx, spec, x0, scenarios);
      PiSearchPoint p;
      p.kp = kp;
      p.ki = ki;
      p.diverged = m.n_diverged > 0;
      p.divergence_time = m.first_divergence_time;
      p.objective = m.objective_mean;
      res.table.push_back(p);
    }
  }
  auto key = [](const PiSearchPoint& p) {
    return std::make_tuple(p.diverged, p.diverged ? -p.divergence_time : p.objective, p.kp, p.ki);
  };
  const auto best = std::min_element(res.table.begin(), res.table.end(),
                                     [&](const auto& a, const auto& b) { return key(a) < key(b); });
  res.best_point = *best;
  res.best.kp = {best->kp};
  res.best.ki = {best->ki};
  if (best->diverged) {
    res.warning = "every PI grid point diverged; returning the latest-diverging point";
  }
  return res;
}

Vector SafMcReport::z_scores(int order) const {
  const Vector& a = order == 0 ? order0 : order1;
  Vector z(a.size());
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double diff = a(k) - mc_sq_mean(k);
    if (mc_sq_stderr(k) > 0.0) {
      z(k) = diff / mc_sq_stderr(k);
    } else {
      z(k) = std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(a(k))) ? 0.0
             : (diff > 0 ? kInf : -kInf);
    }
  }
  return z;
}

double SafMcReport::fraction_inside_ci(int order, int first_step) const {
  const Vector z = z_scores(order);
  int inside = 0;
  int total = 0;
  for (Eigen::Index k = first_step; k < z.size(); ++k) {
    ++total;
    if (std::abs(z(k)) <= 1.96) ++inside;
  }
  return total == 0 ? 1.0 : static_cast<double>(inside) / total;
}

SafMcReport compare_saf_vs_mc(const LinearSystem& sys, const DisturbanceBank& bank,
                              const AffinePolicy& policy, const Vector& x0, double dt,
                              int n_steps, int n_scenarios, std::uint64_t seed) {
  policy.validate(n_steps, sys.nu(), sys.nz());
  const Vector z0 = bank.z0();
  const TrajectoryBundle b = propagate(sys, bank, x0, z0, policy, dt, n_steps);
  const Vector mean = eval_mean(b, sys.freq_row);
  const Vector var = eval_variance(b, sys.freq_row);

  const ScenarioSet set = generate_scenarios(bank, n_scenarios, dt * n_steps, dt, seed);
  std::vector<ScenarioOutcome> outcomes(n_scenarios);
  std::vector<Vector> freq;
  freq.reserve(n_scenarios);
  for (int s = 0; s < n_scenarios; ++s) {
    const Matrix zp = set.path_matrix(s);
    Vector x = x0;
    Vector f(n_steps + 1);
    for (int k = 0; k <= n_steps; ++k) {
      const Vector z = zp.row(k).transpose();
      const Vector u = policy.control(k, z);
      f(k) = sys.freq_row.dot(sys.stack(x, u, z));
      if (k < n_steps) x += dt * sys.rhs(x, u, z);
    }
    freq.push_back(std::move(f));
  }
  const RunMetrics m = reduce_metrics(outcomes, freq, dt);

  SafMcReport r;
  r.t = Vector::LinSpaced(n_steps + 1, 0.0, dt * n_steps);
  r.mc_mean = m.freq_mean_curve;
  r.mc_sq_mean = m.freq_sq_mean_curve;
  r.mc_sq_stderr = m.freq_sq_stderr;
  r.mc_variance = Vector::Zero(n_steps + 1);
  if (n_scenarios > 1) {
    r.mc_variance = (m.freq_sq_mean_curve - m.freq_mean_curve.cwiseAbs2()) *
                    (static_cast<double>(n_scenarios) / (n_scenarios - 1));
  }
  r.order0 = mean.cwiseAbs2();
  r.order1 = r.order0 + var;
  return r;
}

std::string report_csv(const SafMcReport& r) {
  const Vector z0 = r.z_scores(0);
  const Vector z1 = r.z_scores(1);
  std::ostringstream os;
  os << "t,mc_freq_sq_mean,mc_freq_sq_stderr,order0,order1,z_order0,z_order1\n";
  for (Eigen::Index k = 0; k < r.t.size(); ++k) {
    os << fmt(r.t(k)) << ',' << fmt(r.mc_sq_mean(k)) << ',' << fmt(r.mc_sq_stderr(k)) << ','
       << fmt(r.order0(k)) << ',' << fmt(r.order1(k)) << ',' << fmt(z0(k)) << ',' << fmt(z1(k))
       << '\n';
  }
  return os.str();
}

}  // namespace itoagc
