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


// Acceptance suite: one PASS/FAIL line per criterion, details indented below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "itoagc/cli.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace itoagc {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::vector<std::string> details;

  template <typename... Args>
  void note(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), fmt, args...);
    details.emplace_back(buf);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ControlContext toy3_context(double freq_limit, double wind_z0) {
  GridCase grid = testing::toy3();
  grid.freq_limit = freq_limit;
  grid.wind[0].z0 = wind_z0;
  ControlContext ctx;
  ctx.sys = build_linear_system(grid);
  ctx.bank = grid.disturbance_bank();
  ctx.cset = build_constraints(grid, ctx.sys, 0.95);
  ctx.dt_ctrl = 1.0;
  ctx.n_steps = 100;
  return ctx;
}

// Optimal solves collected across the run for the solver-consistency check.
struct SolveRecord {
  std::string label;
  double violation = 0.0;
  // Negative when the program has no SAF counterpart (scenario programs).
  double objective_rel_error = -1.0;
};
std::vector<SolveRecord> g_solves;

void record_policy_solve(const std::string& label, const ControlContext& ctx, const Vector& x0,
                         const Vector& z0, const Solution& sol, int order) {
  if (!sol.optimal()) return;
  SolveRecord r{label, sol.violation.worst(), -1.0};
  if (order >= 0) {
    const int n = sol.policy.horizon();
    const auto b = propagate(ctx.sys, ctx.bank, x0, z0, sol.policy, ctx.dt_ctrl, n);
    const double v =
        eval_saf(b, ctx.weights.running(ctx.sys), ctx.weights.terminal(ctx.sys), order).total();
    // Unit floor: a zero-cost design (DC with no forecast) has no relative scale.
    r.objective_rel_error = std::abs(sol.objective - v) / std::max(std::abs(v), 1.0);
  }
  g_solves.push_back(r);
}

Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const nlohmann::json kinds = nlohmann::json::parse(R"([
    {"kind": "gaussian", "a": 0.5, "b": 0.2},
    {"kind": "beta", "a": 2.0, "b": 5.0},
    {"kind": "gamma", "a": 2.0, "b": 4.0},
    {"kind": "laplace", "a": 0.0, "b": 0.05}])");
  FpCheckOptions opts;
  opts.grid_points = 50;
  opts.paths = 10000;
  opts.residual_tol = 1e-5;
  opts.moment_tol = 0.05;
  bool all = true;
  for (const auto& k : kinds) {
    const FpCheckResult r = fp_check_entry(k, opts);
    all = all && r.passed();
    o.note("%-9s residual %.2e, mean %.5f (target %.5f), variance %.5f (target %.5f): %s",
           r.name.c_str(), r.max_residual, r.sample_mean, r.target_mean, r.sample_variance,
           r.target_variance, r.passed() ? "ok" : "off");
  }
  const double secs = seconds_since(t0);
  o.note("runtime %.2f s (limit 60 s)", secs);
  o.pass = all && secs < 60.0;
  return o;
}

Outcome criterion2() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto sys = oracle::disturbance_only_system(1);
  const auto b = propagate(sys, oracle::ou_bank(1), Vector(), Vector::Ones(1),
                           AffinePolicy::zero(1000, 0, 1), 1e-3, 1000);
  const auto g = QuadraticFunctional::squared_row(RowVector::Ones(1), 1.0);
  const SafValue v = eval_saf(b, QuadraticFunctional::zero(1), g);
  const double secs = seconds_since(t0);
  const double e0 = std::abs(v.order0 - std::exp(-2.0));
  const double e1 = std::abs(v.total() - 1.0);
  o.note("v0 = %.6f (exp(-2) = %.6f), v0 + v1 = %.6f (exact 1), runtime %.3f s", v.order0,
         std::exp(-2.0), v.total(), secs);
  o.pass = e0 <= 1e-2 && e1 <= 1e-2 && secs < 1.0;
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto c = oracle::two_state_lqg();
  const auto b =
      propagate(c.sys, c.bank, c.x0, c.z0, AffinePolicy::zero(c.steps, 0, 1), c.dt, c.steps);
  const double saf = eval_saf(b, c.f, c.g).total();
  const double lyap = oracle::lyapunov_cost(c);
  const double secs = seconds_since(t0);
  const double rel = std::abs(saf - lyap) / std::abs(lyap);
  o.note("first-order SAF %.10f, moment propagation %.10f, relative error %.2e, runtime %.3f s",
         saf, lyap, rel, secs);
  o.pass = rel < 5e-3 && secs < 5.0;
  return o;
}

Outcome criterion4() {
  Outcome o;
  const ControlContext ctx = toy3_context(0.1, 0.1);
  const Vector x0 = Vector::Zero(ctx.sys.nx());
  const Vector z0 = ctx.bank.z0();
  const PolicyDesign d = design_scp(ctx, x0, z0);
  double worst = 0.0;
  if (d.solution.optimal()) {
    const double e = oracle::max_fd_sensitivity_error(ctx.sys, ctx.bank, x0, z0,
                                                      d.solution.policy, 1.0, 100, 1e-5);
    o.note("designed policy, dt 1 s, 100 steps: max |S_hat - FD| = %.2e", e);
    worst = std::max(worst, e);
  } else {
    o.note("SCP design failed: %s", std::string(to_string(d.solution.status)).c_str());
    worst = kInf;
  }
  Matrix f1(1, 3);
  f1 << -0.3, 0.1, -0.5;
  const auto fixed = AffinePolicy::constant(Matrix::Constant(2000, 3, 0.01), f1);
  Vector xs = Vector::Zero(ctx.sys.nx());
  xs(0) = 0.01;
  const double e2 = oracle::max_fd_sensitivity_error(ctx.sys, ctx.bank, xs, Vector::Constant(1, 0.05),
                                                     fixed, 1e-3, 2000, 1e-5);
  o.note("fixed affine policy, dt 1 ms, 2000 steps: max |S_hat - FD| = %.2e", e2);
  worst = std::max(worst, e2);
  o.pass = worst < 1e-6;
  return o;
}

Outcome criterion5() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  GridCase grid = testing::toy3();
  grid.wind[0].process = make_standard_process(ProcessKind::kLaplaceCase45, 0.0, 0.05);
  grid.wind[0].z0 = 0.1;
  const LinearSystem sys = build_linear_system(grid);
  PiParams pi;
  pi.kp = {0.3};
  pi.ki = {0.1};
  const PiClosedLoop pc = pi_closed_loop(sys, pi);
  const int n = 1000;
  const double dt = 0.1;
  const SafMcReport r =
      compare_saf_vs_mc(pc.sys, grid.disturbance_bank(), AffinePolicy::zero(n, 0, 1),
                        Vector::Zero(pc.sys.nx()), dt, n, 1000, 5);
  const double inside1 = r.fraction_inside_ci(1);
  const Vector z0s = r.z_scores(0);
  int outside0 = 0;
  const int first = 3 * n / 4;
  for (int k = first; k <= n; ++k) outside0 += std::abs(z0s(k)) > 1.96 ? 1 : 0;
  const double secs = seconds_since(t0);
  o.note("PI kp 0.3, ki 0.1; wind laplace_case45, z0 0.1; dt %.1f s, %d steps, 1000 scenarios", dt,
         n);
  o.note("order-1 inside 95%% CI at %.1f%% of steps (need >= 95%%)", 100.0 * inside1);
  o.note("order-0 outside CI at %d of %d final-quarter steps", outside0, n - first + 1);
  for (int k : {100, 500, 1000}) {
    o.note("t = %5.1f s: MC E[df^2] %.3e +/- %.1e, order-0 %.3e, order-1 %.3e", r.t(k),
           r.mc_sq_mean(k), r.mc_sq_stderr(k), r.order0(k), r.order1(k));
  }
  o.note("runtime %.2f s (limit 300 s)", secs);
  o.pass = inside1 >= 0.95 && outside0 == n - first + 1 && secs < 300.0;
  return o;
}

// Closed forms for the program sizes on a model with nx states, nz sources,
// nc constraint rows and n steps.
int scp_vars(int nx, int nz, int n) { return (nx + nz) * n + (nx + nz) * nz * n + n; }
int scp_cons(int nx, int nz, int nc, int n) {
  return (nx + nz) * n + (nx + nz) * nz * n + 1 + nc * n + 1 + n;
}
int dc_vars(int nx, int nz, int n) { return (nx + nz) * n; }
int dc_cons(int nx, int nz, int nc, int n) { return (nx + nz) * n + nc * n + 1; }
int sbsp_vars(int nx, int nz, int n, int s) { return s * dc_vars(nx, nz, n); }
int sbsp_cons(int nx, int nz, int nc, int n, int s) { return s * dc_cons(nx, nz, nc, n); }

Outcome criterion6() {
  Outcome o;
  const ControlContext ctx = toy3_context(0.1, 0.1);
  const Vector x0 = Vector::Zero(ctx.sys.nx());
  const Vector z0 = ctx.bank.z0();
  const int nx = ctx.sys.nx();
  const int nz = ctx.sys.nz();
  const int nc = ctx.cset.size();
  bool ok = true;
  auto check = [&](const char* name, int n, const ProblemSize& s, int vars, int cons) {
    const bool good = s.n_vars == vars && s.n_constraints() == cons;
    ok = ok && good;
    o.note("%-10s N_t = %3d: variables %6d (closed form %6d), constraints %6d (closed form %6d)",
           name, n, s.n_vars, vars, s.n_constraints(), cons);
  };
  ControllerSpec mpc;
  mpc.kind = ControllerKind::kMPC;
  for (int n : {10, 100}) {
    check("SCP-opt", n,
          count_problem_size(assemble_scp(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x0, z0, 1.0, n)),
          scp_vars(nx, nz, n), scp_cons(nx, nz, nc, n));
    check("DC", n,
          count_problem_size(
              assemble_deterministic(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x0, z0, 1.0, n)),
          dc_vars(nx, nz, n), dc_cons(nx, nz, nc, n));
    const int h = std::min(mpc.mpc.horizon_steps, n);
    check("MPC/step", n,
          count_problem_size(
              assemble_deterministic(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x0, z0, 1.0, h)),
          dc_vars(nx, nz, h), dc_cons(nx, nz, nc, h));
    check("SBSP(100)", n,
          count_problem_size(
              assemble_sbsp(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x0, z0, 100, 1, 1.0, n)),
          sbsp_vars(nx, nz, n, 100), sbsp_cons(nx, nz, nc, n, 100));
  }
  o.pass = ok;
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const int n_scenarios = 1000;
  const Vector x0 = Vector::Zero(6);

  // Objective ordering, SBSP proximity and timing on the default case.
  const ControlContext base = toy3_context(0.1, 0.0);
  const ScenarioSet scen = generate_scenarios(base.bank, n_scenarios, 100.0, 0.1, 2026);
  const ScenarioSet tune = generate_scenarios(base.bank, 50, 100.0, 0.1, 7);
  const PiTuning grid;
  const PiSearchResult pi = grid_search_pi(base, x0, tune, grid.kp, grid.ki);
  o.note("PI tuned on 50 separate scenarios: kp %.3g, ki %.3g", pi.best.kp[0], pi.best.ki[0]);

  auto run = [&](const ControlContext& ctx, const ScenarioSet& set, ControllerSpec spec,
                 double* design_seconds) {
    const PreparedController p = prepare_controller(ctx, spec, x0, ctx.bank.z0());
    if (p.has_design) {
      const int order = spec.kind == ControllerKind::kScpAffine ? 1
                        : spec.kind == ControllerKind::kDC      ? 0
                                                                : -1;
      record_policy_solve(display_name(spec.kind, spec.sbsp.n_scenarios), ctx, x0,
                          ctx.bank.z0(), p.design.solution, order);
    }
    if (design_seconds != nullptr) *design_seconds = p.design.seconds;
    if (!p.ready()) {
      RunMetrics m;
      m.controller = display_name(spec.kind, spec.sbsp.n_scenarios);
      m.objective_mean = kInf;
      m.violation_rate = 1.0;
      return m;
    }
    return run_monte_carlo(ctx, p.spec, x0, set);
  };
  ControllerSpec scp_spec;
  scp_spec.kind = ControllerKind::kScpAffine;
  ControllerSpec dc_spec;
  dc_spec.kind = ControllerKind::kDC;
  ControllerSpec pi_spec;
  pi_spec.kind = ControllerKind::kPI;
  pi_spec.pi = pi.best;
  ControllerSpec mpc_spec;
  mpc_spec.kind = ControllerKind::kMPC;
  ControllerSpec sbsp_spec;
  sbsp_spec.kind = ControllerKind::kSBSP;
  sbsp_spec.sbsp.n_scenarios = 100;

  double t_scp = 0.0;
  double t_sbsp = 0.0;
  const RunMetrics scp = run(base, scen, scp_spec, &t_scp);
  const RunMetrics dc = run(base, scen, dc_spec, nullptr);
  const RunMetrics pim = run(base, scen, pi_spec, nullptr);
  const RunMetrics sbsp = run(base, scen, sbsp_spec, &t_sbsp);
  const RunMetrics mpc = run(base, scen, mpc_spec, nullptr);
  for (const auto* m : {&scp, &dc, &pim, &mpc, &sbsp}) {
    o.note("default  %-10s objective %8.1f +/- %5.1f, violation %5.1f%%", m->controller.c_str(),
           m->objective_mean, m->objective_stderr, 100.0 * m->violation_rate);
  }
  const bool order_scp_dc = scp.objective_mean <= dc.objective_mean;
  const bool order_dc_pi = dc.objective_mean <= pim.objective_mean;
  o.note("objective(SCP-opt) <= objective(DC): %s", order_scp_dc ? "yes" : "no");
  o.note("objective(DC) <= objective(PI): %s", order_dc_pi ? "yes" : "no");
  const double gap = std::abs(sbsp.objective_mean - scp.objective_mean) / scp.objective_mean;
  o.note("|SBSP(100) - SCP-opt| / SCP-opt = %.2f%% (need <= 5%%)", 100.0 * gap);
  const double t_mpc = mpc.solve_seconds_per_run;
  o.note("wall time: SCP-opt %.3f s, SBSP(100) %.3f s, MPC over the horizon %.3f s", t_scp,
         t_sbsp, t_mpc);
  const bool faster_sbsp = t_scp < t_sbsp / 5.0;
  const bool faster_mpc = t_scp < t_mpc;
  o.note("SCP-opt < SBSP(100)/5: %s; SCP-opt < MPC: %s", faster_sbsp ? "yes" : "no",
         faster_mpc ? "yes" : "no");

  // Violation comparison on the wind-stressed variant.
  const ControlContext stressed = toy3_context(0.005, 0.4);
  const ScenarioSet sscen = generate_scenarios(stressed.bank, n_scenarios, 100.0, 0.1, 2026);
  const RunMetrics sscp = run(stressed, sscen, scp_spec, nullptr);
  const RunMetrics sdc = run(stressed, sscen, dc_spec, nullptr);
  o.note("stressed (limit 0.005 Hz, wind z0 0.4): SCP-opt violation %.1f%%, DC violation %.1f%%",
         100.0 * sscp.violation_rate, 100.0 * sdc.violation_rate);
  const bool viol = sscp.violation_rate <= 0.05 && sdc.violation_rate > 0.05;
  const double secs = seconds_since(t0);
  o.note("runtime %.1f s (limit 1200 s)", secs);
  o.pass = order_scp_dc && order_dc_pi && viol && gap <= 0.05 && faster_sbsp && faster_mpc &&
           secs < 1200.0;
  return o;
}

Outcome criterion8() {
  Outcome o;
  // MPC programs at states visited by one closed-loop run.
  const ControlContext ctx = toy3_context(0.005, 0.4);
  auto shared = std::make_shared<const ControlContext>(ctx);
  ControllerSpec mpc_spec;
  mpc_spec.kind = ControllerKind::kMPC;
  Controller c(shared, mpc_spec);
  const ScenarioSet one = generate_scenarios(ctx.bank, 1, 100.0, 1.0, 3);
  const ClosedLoopTrajectory traj =
      simulate_closed_loop(ctx, c, Vector::Zero(6), one.path_matrix(0), 1.0);
  ControlContext mctx = ctx;
  mctx.bank = ctx.bank.deterministic();
  InteriorPointBackend ipm;
  for (int k = 0; k < 100; k += 10) {
    const Vector x = traj.X.row(k).transpose();
    const Vector z = traj.Z.row(k).transpose();
    const ConicProgram prog = assemble_deterministic(ctx.sys, ctx.bank, ctx.cset, ctx.weights, x,
                                                     z, 1.0, mpc_spec.mpc.horizon_steps);
    const Solution sol = solve(prog, ipm, ctx.solver);
    record_policy_solve("MPC step " + std::to_string(k), mctx, x, z, sol, 0);
  }

  double worst_violation = 0.0;
  double worst_objective = 0.0;
  int n_objective = 0;
  for (const auto& r : g_solves) {
    worst_violation = std::max(worst_violation, r.violation);
    if (r.objective_rel_error >= 0.0) {
      worst_objective = std::max(worst_objective, r.objective_rel_error);
      ++n_objective;
    }
  }
  o.note("%zu optimal solves checked; worst re-substitution violation %.2e (limit 1e-6)",
         g_solves.size(), worst_violation);
  o.note("%d objectives re-evaluated by the SAF engine; worst relative error %.2e (limit 1e-4)",
         n_objective, worst_objective);
  o.pass = !g_solves.empty() && worst_violation <= 1e-6 && worst_objective <= 1e-4;
  return o;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9() {
  Outcome o;
  const auto dir = testing::scratch_dir("acceptance_determinism");
  nlohmann::json doc = {
      {"case", data_path("toy3.json")},
      {"controller", {{"kind", "scp"}}},
      {"horizon", {{"dt_ctrl", 1.0}, {"steps", 100}}},
      {"gamma", 0.95},
      {"mc", {{"scenarios", 200}, {"dt_sim", 0.1}, {"seed", 2026}}},
      {"compare", nlohmann::json::array({{{"kind", "scp"}},
                                         {{"kind", "dc"}},
                                         {{"kind", "pi"}},
                                         {{"kind", "sbsp"}, {"scenarios", 20}}})},
      {"pi_tuning", {{"kp", {0.1, 0.3}}, {"ki", {0.0, 0.01}}, {"scenarios", 20}}}};
  const std::string cfg = testing::write_text(dir / "config.json", doc.dump(2));
  bool ran = true;
  for (const char* sub : {"a", "b"}) {
    const std::string out = (dir / sub).string();
    const char* argv[] = {"itoagc", "validate", "--config", cfg.c_str(), "--out", out.c_str(),
                          "--compare", "--order", "1"};
    std::ostringstream so;
    std::ostringstream se;
    const int code = run_cli(9, argv, so, se);
    if (code != 0) {
      o.note("run %s exited with %d: %s", sub, code, se.str().c_str());
      ran = false;
    }
  }
  int n_files = 0;
  int n_same = 0;
  if (ran) {
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      if (e.path().extension() != ".csv") continue;
      ++n_files;
      const bool same = read_file(e.path()) == read_file(dir / "b" / e.path().filename());
      n_same += same ? 1 : 0;
      if (!same) o.note("%s differs", e.path().filename().string().c_str());
    }
  }
  o.note("%d of %d CSV artifacts byte-identical across two runs", n_same, n_files);
  o.pass = ran && n_files > 0 && n_same == n_files;
  fs::remove_all(dir);
  return o;
}

}  // namespace
}  // namespace itoagc

// Optional arguments select criteria by number; the default runs all nine.
int main(int argc, char** argv) {
  using itoagc::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 stationarity suite", itoagc::criterion1},
      {"2 Ornstein-Uhlenbeck exactness", itoagc::criterion2},
      {"3 linear-quadratic termination", itoagc::criterion3},
      {"4 sensitivity vs finite differences", itoagc::criterion4},
      {"5 SAF vs Monte Carlo under PI", itoagc::criterion5},
      {"6 problem-size closed forms", itoagc::criterion6},
      {"7 controller benchmark ordering", itoagc::criterion7},
      {"8 solver consistency", itoagc::criterion8},
      {"9 determinism", itoagc::criterion9},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  int failed = 0;
  int ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++ran;
    const auto& [name, fn] = criteria[i];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.details.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << name << "\n";
    for (const auto& d : o.details) std::cout << "    " << d << "\n";
    std::cout.flush();
    failed += o.pass ? 0 : 1;
  }
  std::cout << (ran - failed) << " of " << ran << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
