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


#include "itoagc/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace itoagc {

namespace fs = std::filesystem;

namespace {

Error config_error(const std::string& msg) { return Error(ErrorCode::kValidationError, msg); }

std::string resolve_case(const std::string& name, const std::string& base_dir) {
  const fs::path p(name);
  if (p.is_absolute()) {
    if (fs::exists(p)) return p.string();
  } else {
    const fs::path local = fs::path(base_dir) / p;
    if (fs::exists(local)) return local.string();
    const std::string bundled = data_path(name);
    if (fs::exists(bundled)) return bundled;
  }
  throw config_error("case file '" + name + "' not found");
}

std::vector<double> number_list(const nlohmann::json& v, const std::string& what) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw config_error(what + ": expected a number or an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw config_error(what + ": expected numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void check_keys(const nlohmann::json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw config_error(where + ": unknown field '" + it.key() + "'");
  }
}

ObjectiveWeights weights_from_json(const nlohmann::json& j) {
  check_keys(j, "weights", {"lambda_ace", "lambda_u", "mu_ace", "area"});
  ObjectiveWeights w;
  if (j.contains("lambda_ace")) w.lambda_ace = j.at("lambda_ace").get<double>();
  if (j.contains("mu_ace")) w.mu_ace = j.at("mu_ace").get<double>();
  if (j.contains("area")) w.area = j.at("area").get<int>();
  if (j.contains("lambda_u")) {
    const auto& v = j.at("lambda_u");
    if (v.is_number()) {
      w.lambda_u = Matrix::Constant(1, 1, v.get<double>());
    } else {
      const auto rows = v.size();
      w.lambda_u.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
      for (std::size_t r = 0; r < rows; ++r) {
        const auto row = number_list(v.at(r), "weights.lambda_u");
        if (row.size() != rows) throw config_error("weights.lambda_u must be square");
        for (std::size_t c = 0; c < rows; ++c) w.lambda_u(r, c) = row[c];
      }
    }
  }
  return w;
}

std::string provenance_line(const RunConfig& cfg, std::uint64_t seed) {
  return std::string("# itoagc ") + kVersion + " config=" + cfg.hash + " seed=" +
         std::to_string(seed) + "\n";
}

nlohmann::json provenance(const RunConfig& cfg, std::uint64_t seed) {
  return {{"tool", "itoagc"}, {"version", kVersion}, {"config_hash", cfg.hash}, {"seed", seed}};
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string out_dir_of(const RunConfig& cfg, const CliOptions& opts) {
  const std::string dir = opts.out_dir ? *opts.out_dir : cfg.output_dir;
  fs::create_directories(dir);
  return dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string file_stem(const ControllerSpec& s) {
  std::string name(to_string(s.kind));
  if (s.kind == ControllerKind::kSBSP) name += std::to_string(s.sbsp.n_scenarios);
  return name;
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// Moments of a tabulated density by quadrature over its support.
Moments numeric_moments(const ScalarFn& pdf, Interval support) {
  const double tol = 1e-12;
  const double mass = adaptive_simpson(pdf, support.lo, support.hi, tol);
  const double mean =
      adaptive_simpson([&](double z) { return z * pdf(z); }, support.lo, support.hi, tol) / mass;
  const double var = adaptive_simpson([&](double z) { return (z - mean) * (z - mean) * pdf(z); },
                                      support.lo, support.hi, tol) / mass;
  return {mean, var};
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

RunConfig run_config_from_json(const nlohmann::json& doc, const std::string& base_dir) {
  if (!doc.is_object()) throw config_error("run config must be a JSON object");
  check_keys(doc, "config", {"case", "case_overrides", "controller", "horizon", "gamma", "weights",
                             "mc", "compare", "pi_tuning", "fp_check", "output_dir"});
  RunConfig cfg;
  try {
    if (doc.contains("case")) {
      cfg.case_path = resolve_case(doc.at("case").get<std::string>(), base_dir);
    }
    if (doc.contains("case_overrides")) {
      cfg.case_overrides = doc.at("case_overrides");
      check_keys(cfg.case_overrides, "case_overrides", {"freq_hz", "wind_z0"});
    }
    if (doc.contains("controller")) {
      cfg.controller = controller_from_json(doc.at("controller"));
      cfg.controller_present = true;
    } else {
      cfg.controller.kind = ControllerKind::kScpAffine;
    }
    if (doc.contains("horizon")) {
      const auto& h = doc.at("horizon");
      check_keys(h, "horizon", {"dt_ctrl", "steps"});
      cfg.dt_ctrl = h.value("dt_ctrl", cfg.dt_ctrl);
      cfg.n_steps = h.value("steps", cfg.n_steps);
    }
    if (!(cfg.dt_ctrl > 0.0)) throw config_error("horizon.dt_ctrl must be positive");
    if (cfg.n_steps < 1) throw config_error("horizon.steps must be >= 1");
    if (doc.contains("gamma")) cfg.gamma = doc.at("gamma").get<double>();
    if (!(cfg.gamma > 0.5)) throw config_error("gamma must exceed 0.5");
    if (!(cfg.gamma < 1.0)) throw config_error("gamma must be below 1");
    if (doc.contains("weights")) cfg.weights = weights_from_json(doc.at("weights"));
    if (doc.contains("mc")) {
      const auto& m = doc.at("mc");
      check_keys(m, "mc", {"scenarios", "dt_sim", "seed", "horizon"});
      cfg.mc.present = true;
      cfg.mc.scenarios = m.value("scenarios", cfg.mc.scenarios);
      cfg.mc.dt_sim = m.value("dt_sim", cfg.mc.dt_sim);
      if (m.contains("seed")) cfg.mc.seed = m.at("seed").get<std::uint64_t>();
      if (cfg.mc.scenarios < 1) throw config_error("mc.scenarios must be >= 1");
      if (!(cfg.mc.dt_sim > 0.0)) throw config_error("mc.dt_sim must be positive");
      if (m.contains("horizon")) {
        const double t = m.at("horizon").get<double>();
        if (std::abs(t - cfg.n_steps * cfg.dt_ctrl) > 1e-9 * t) {
          throw config_error("mc.horizon must equal horizon.steps * horizon.dt_ctrl");
        }
      }
      const double ratio = cfg.dt_ctrl / cfg.mc.dt_sim;
      if (ratio < 1.0 - 1e-12 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
        throw config_error("mc.dt_sim must divide horizon.dt_ctrl");
      }
    }
    if (doc.contains("compare")) {
      for (const auto& c : doc.at("compare")) cfg.compare.push_back(controller_from_json(c));
    }
    if (doc.contains("pi_tuning")) {
      const auto& t = doc.at("pi_tuning");
      check_keys(t, "pi_tuning", {"kp", "ki", "scenarios", "seed"});
      if (t.contains("kp")) cfg.pi_tuning.kp = number_list(t.at("kp"), "pi_tuning.kp");
      if (t.contains("ki")) cfg.pi_tuning.ki = number_list(t.at("ki"), "pi_tuning.ki");
      cfg.pi_tuning.scenarios = t.value("scenarios", cfg.pi_tuning.scenarios);
      cfg.pi_tuning.seed = t.value("seed", cfg.pi_tuning.seed);
      if (cfg.pi_tuning.kp.empty() || cfg.pi_tuning.ki.empty()) {
        throw config_error("pi_tuning grids must be nonempty");
      }
    }
    if (doc.contains("fp_check")) {
      const auto& f = doc.at("fp_check");
      check_keys(f, "fp_check", {"processes", "grid_points", "paths", "dt", "seed",
                                 "residual_tol", "moment_tol", "relaxation_times"});
      if (f.contains("processes")) cfg.fp_processes = f.at("processes");
      cfg.fp.grid_points = f.value("grid_points", cfg.fp.grid_points);
      cfg.fp.paths = f.value("paths", cfg.fp.paths);
      cfg.fp.dt = f.value("dt", cfg.fp.dt);
      cfg.fp.seed = f.value("seed", cfg.fp.seed);
      cfg.fp.residual_tol = f.value("residual_tol", cfg.fp.residual_tol);
      cfg.fp.moment_tol = f.value("moment_tol", cfg.fp.moment_tol);
      cfg.fp.relaxation_times = f.value("relaxation_times", cfg.fp.relaxation_times);
    }
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("config: ") + e.what());
  }
  cfg.canonical = doc.dump();
  cfg.hash = fnv1a_hex(cfg.canonical);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  const auto base = fs::path(path).parent_path();
  return run_config_from_json(doc, base.empty() ? "." : base.string());
}

GridCase load_configured_case(const RunConfig& cfg) {
  if (cfg.case_path.empty()) throw config_error("config has no 'case'");
  GridCase grid = load_case(cfg.case_path);
  const auto& o = cfg.case_overrides;
  if (o.contains("freq_hz")) grid.freq_limit = o.at("freq_hz").get<double>();
  if (o.contains("wind_z0")) {
    const auto z0 = number_list(o.at("wind_z0"), "case_overrides.wind_z0");
    if (z0.size() != grid.wind.size()) {
      throw config_error("case_overrides.wind_z0 needs one entry per wind source");
    }
    for (std::size_t i = 0; i < z0.size(); ++i) grid.wind[i].z0 = z0[i];
  }
  grid.validate();
  return grid;
}

ControlContext make_context(const RunConfig& cfg, const GridCase& grid) {
  ControlContext ctx;
  ctx.sys = build_linear_system(grid);
  ctx.bank = grid.disturbance_bank();
  ctx.cset = build_constraints(grid, ctx.sys, cfg.gamma);
  ctx.weights = cfg.weights;
  ctx.weights.validate(ctx.sys.nu());
  ctx.dt_ctrl = cfg.dt_ctrl;
  ctx.n_steps = cfg.n_steps;
  return ctx;
}

void write_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + tmp + "'");
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "write to '" + tmp + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot rename '" + tmp + "': " + ec.message());
}

FpCheckResult fp_check(const std::string& name, const ItoProcess1D& proc, const ScalarFn& pdf,
                       const Moments& target, const FpCheckOptions& opts) {
  require(opts.grid_points >= 2 && opts.paths >= 2 && opts.dt > 0.0,
          ErrorCode::kInvalidParameter, "fp-check needs >= 2 grid points and paths");
  FpCheckResult r;
  r.name = name;
  r.target_mean = target.mean;
  r.target_variance = target.variance;
  const double sd = std::sqrt(target.variance);
  const double h = opts.fd_step;
  const double margin = std::max(10.0 * h, 0.02 * sd);
  const Interval& sup = proc.support();
  const double lo = std::max(target.mean - 3.0 * sd, sup.lo + margin);
  const double hi = std::min(target.mean + 3.0 * sd, sup.hi - margin);
  const bool kinked =
      proc.kind() == ProcessKind::kLaplace || proc.kind() == ProcessKind::kLaplaceCase45;
  for (int i = 0; i < opts.grid_points; ++i) {
    double z = lo + (hi - lo) * i / (opts.grid_points - 1);
    // The Laplace density has a kink at its center; keep the stencil off it.
    if (kinked && std::abs(z - proc.a()) < 5.0 * h) z = proc.a() + (z < proc.a() ? -5.0 : 5.0) * h;
    r.max_residual = std::max(r.max_residual, std::abs(fokker_planck_residual(proc, pdf, z, h)));
  }
  r.residual_ok = r.max_residual < opts.residual_tol;

  const double slope = std::abs(proc.drift_slope(target.mean));
  const double horizon = opts.relaxation_times / std::max(slope, 1e-12);
  const int steps = static_cast<int>(std::ceil(horizon / opts.dt));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int p = 0; p < opts.paths; ++p) {
    const auto path = sample_path(proc, target.mean, opts.dt, steps, opts.seed,
                                  static_cast<std::uint64_t>(p));
    const double v = path.values.back();
    sum += v;
    sum_sq += v * v;
  }
  r.sample_mean = sum / opts.paths;
  r.sample_variance = (sum_sq - opts.paths * r.sample_mean * r.sample_mean) / (opts.paths - 1);
  r.moments_ok = std::abs(r.sample_mean - target.mean) <= opts.moment_tol * sd &&
                 std::abs(r.sample_variance / target.variance - 1.0) <= opts.moment_tol;
  return r;
}

FpCheckResult fp_check_entry(const nlohmann::json& entry, const FpCheckOptions& opts) {
  if (!entry.is_object()) throw config_error("fp_check process entries must be objects");
  nlohmann::json spec = entry;
  const double scale = spec.value("diffusion_scale", 1.0);
  const bool named = spec.contains("name");
  std::string name = spec.value("name", spec.value("kind", std::string("process")));
  spec.erase("diffusion_scale");
  spec.erase("name");
  const ItoProcess1D base = process_from_json(spec);
  ScalarFn pdf;
  Moments target;
  if (base.kind() == ProcessKind::kCustom) {
    auto grid = std::make_shared<std::vector<std::pair<double, double>>>();
    for (const auto& row : spec.at("pdf_grid")) grid->emplace_back(row[0].get<double>(), row[1].get<double>());
    std::sort(grid->begin(), grid->end());
    pdf = [grid](double z) {
      const auto& g = *grid;
      if (z <= g.front().first) return g.front().second;
      if (z >= g.back().first) return g.back().second;
      std::size_t k = 1;
      while (g[k].first < z) ++k;
      const double w = (z - g[k - 1].first) / (g[k].first - g[k - 1].first);
      return g[k - 1].second + w * (g[k].second - g[k - 1].second);
    };
    target = numeric_moments(pdf, base.support());
  } else {
    const auto p = stationary_pdf(base.kind(), base.a(), base.b());
    const auto m = stationary_moments(base.kind(), base.a(), base.b());
    if (!p || !m) {
      throw config_error("kind '" + std::string(to_string(base.kind())) +
                         "' has no closed-form stationary density");
    }
    pdf = *p;
    target = *m;
  }
  if (scale != 1.0) {
    if (!named) name += " (diffusion x" + fixed(scale, 2) + ")";
    return fp_check(name, base.with_scaled_diffusion(scale), pdf, target, opts);
  }
  return fp_check(name, base, pdf, target, opts);
}

int cmd_solve(const RunConfig& cfg, const CliOptions& opts, std::ostream& out,
              std::ostream& err) {
  const GridCase grid = load_configured_case(cfg);
  const ControlContext ctx = make_context(cfg, grid);
  const std::uint64_t seed = opts.seed ? *opts.seed : cfg.mc.seed.value_or(0);
  const Vector x0 = Vector::Zero(ctx.sys.nx());
  const Vector z0 = ctx.bank.z0();
  ControllerSpec spec = cfg.controller;
  PolicyDesign d;
  ConicProgram mpc_prog;
  switch (spec.kind) {
    case ControllerKind::kScpAffine:
      d = design_scp(ctx, x0, z0);
      break;
    case ControllerKind::kDC:
      d = design_dc(ctx, x0, z0);
      break;
    case ControllerKind::kSBSP:
      d = design_sbsp(ctx, x0, z0, spec.sbsp.n_scenarios, opts.seed ? seed : spec.sbsp.seed);
      break;
    case ControllerKind::kMPC: {
      const auto t0 = std::chrono::steady_clock::now();
      const ConicProgram prog = assemble_deterministic(ctx.sys, ctx.bank, ctx.cset, ctx.weights,
                                                       x0, z0, ctx.dt_ctrl, spec.mpc.horizon_steps);
      InteriorPointBackend ipm;
      d.solution = solve(prog, ipm, ctx.solver);
      d.size = count_problem_size(prog);
      d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      break;
    }
    case ControllerKind::kPI:
      err << "error: solve needs an optimization-based controller (scp, dc, mpc, sbsp)\n";
      return kExitError;
  }
  const Solution& sol = d.solution;
  const std::string dir = out_dir_of(cfg, opts);

  nlohmann::json stats = to_json(d.size);
  stats["provenance"] = provenance(cfg, seed);
  stats["kind"] = std::string(to_string(spec.kind));
  stats["status"] = std::string(to_string(sol.status));
  stats["iterations"] = sol.iterations;
  stats["n_constraints"] = d.size.n_constraints();
  if (sol.optimal()) stats["objective"] = sol.objective;
  write_atomic(join(dir, "program_stats.json"), stats.dump(2) + "\n");

  std::ostringstream log;
  log << provenance_line(cfg, seed);
  log << "kind: " << to_string(spec.kind) << "\n";
  log << "status: " << to_string(sol.status) << "\n";
  if (!sol.message.empty()) log << "message: " << sol.message << "\n";
  log << "iterations: " << sol.iterations << "\n";
  log << "variables: " << d.size.n_vars << " (+" << d.size.n_policy << " policy, +"
      << d.size.n_auxiliary << " auxiliary)\n";
  log << "constraints: " << d.size.n_constraints() << "\n";
  log << "seconds: " << d.seconds << "\n";
  if (sol.optimal()) {
    log << "objective: " << std::setprecision(12) << sol.objective << "\n";
    log << "max re-substitution violation: " << sol.violation.worst() << "\n";
    if (spec.kind == ControllerKind::kScpAffine || spec.kind == ControllerKind::kDC) {
      const int order = opts.order.value_or(1);
      const auto b = propagate(ctx.sys, ctx.bank, x0, z0, sol.policy, ctx.dt_ctrl, ctx.n_steps);
      const SafValue v = eval_saf(b, ctx.weights.running(ctx.sys), ctx.weights.terminal(ctx.sys), order);
      log << "saf order " << order << ": " << v.total() << "\n";
    }
    nlohmann::json pol;
    pol["provenance"] = provenance(cfg, seed);
    pol["kind"] = std::string(to_string(spec.kind));
    pol["objective"] = sol.objective;
    pol["n_steps"] = sol.policy.horizon();
    pol["nu"] = sol.policy.nu();
    pol["nz"] = sol.policy.nz();
    pol["time_varying"] = sol.policy.time_varying();
    pol["U0"] = matrix_json(sol.policy.U0);
    nlohmann::json f1 = nlohmann::json::array();
    for (const auto& f : sol.policy.F1) f1.push_back(matrix_json(f));
    pol["F1"] = f1;
    write_atomic(join(dir, "policy.json"), pol.dump(2) + "\n");
  }
  write_atomic(join(dir, "solve_log.txt"), log.str());
  out << to_string(spec.kind) << ": " << to_string(sol.status);
  if (sol.optimal()) out << ", objective " << sol.objective;
  out << " (" << sol.iterations << " iterations)\n";
  if (sol.optimal()) return kExitOk;
  if (sol.status == SolveStatus::kInfeasible) {
    err << "error: the program is infeasible\n";
    return kExitInfeasible;
  }
  err << "error: solver stopped with status " << to_string(sol.status) << "\n";
  return kExitError;
}

int cmd_validate(const RunConfig& cfg, const CliOptions& opts, std::ostream& out,
                 std::ostream& err) {
  if (!opts.seed && !cfg.mc.seed) {
    err << "error: validate needs mc.seed in the config or --seed\n";
    return kExitError;
  }
  const std::uint64_t seed = opts.seed ? *opts.seed : *cfg.mc.seed;
  const GridCase grid = load_configured_case(cfg);
  const ControlContext ctx = make_context(cfg, grid);
  const Vector x0 = Vector::Zero(ctx.sys.nx());
  const Vector z0 = ctx.bank.z0();
  const double horizon = ctx.n_steps * ctx.dt_ctrl;
  const ScenarioSet scenarios =
      generate_scenarios(ctx.bank, cfg.mc.scenarios, horizon, cfg.mc.dt_sim, seed);
  const std::string dir = out_dir_of(cfg, opts);

  std::vector<ControllerSpec> list;
  if (opts.compare) {
    list = cfg.compare;
    if (list.empty()) {
      for (auto k : {ControllerKind::kScpAffine, ControllerKind::kDC, ControllerKind::kPI,
                     ControllerKind::kMPC, ControllerKind::kSBSP}) {
        ControllerSpec s;
        s.kind = k;
        list.push_back(s);
      }
    }
  } else {
    list = {cfg.controller};
  }

  std::ostringstream log;
  log << provenance_line(cfg, seed);
  std::vector<RunMetrics> results;
  std::vector<ControllerSpec> used;
  for (ControllerSpec spec : list) {
    if (spec.kind == ControllerKind::kPI && spec.pi.kp.empty()) {
      const ScenarioSet tune = generate_scenarios(ctx.bank, cfg.pi_tuning.scenarios, horizon,
                                                  cfg.mc.dt_sim, cfg.pi_tuning.seed);
      const PiSearchResult r = grid_search_pi(ctx, x0, tune, cfg.pi_tuning.kp, cfg.pi_tuning.ki);
      spec.pi = r.best;
      log << "pi tuning: kp " << r.best.kp[0] << ", ki " << r.best.ki[0] << ", objective "
          << r.best_point.objective << "\n";
      if (!r.warning.empty()) {
        log << "warning: " << r.warning << "\n";
        err << "warning: " << r.warning << "\n";
      }
    }
    const PreparedController p = prepare_controller(ctx, spec, x0, z0);
    if (!p.ready()) {
      const auto status = p.design.solution.status;
      err << "error: " << display_name(spec.kind, spec.sbsp.n_scenarios) << " design "
          << to_string(status) << "\n";
      return status == SolveStatus::kInfeasible ? kExitInfeasible : kExitError;
    }
    RunMetrics m = run_monte_carlo(ctx, p.spec, x0, scenarios);
    m.design_seconds = p.design.seconds;
    for (const auto& e : m.events) log << m.controller << ": " << e << "\n";
    log << m.controller << ": objective " << m.objective_mean << ", violation "
        << m.violation_rate << ", diverged " << m.n_diverged << "\n";
    results.push_back(std::move(m));
    used.push_back(p.spec);
  }

  // The configured controller supplies metrics.csv.
  std::size_t primary = 0;
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (used[i].kind == cfg.controller.kind) {
      primary = i;
      break;
    }
  }
  write_atomic(join(dir, "metrics.csv"), provenance_line(cfg, seed) + metrics_csv(results[primary]));
  nlohmann::json summary;
  summary["provenance"] = provenance(cfg, seed);
  summary["scenarios"] = cfg.mc.scenarios;
  summary["dt_sim"] = cfg.mc.dt_sim;
  summary["controllers"] = nlohmann::json::array();
  for (const auto& m : results) summary["controllers"].push_back(metrics_summary(m));
  const auto& pm = results[primary];
  summary["objective_mean"] = metrics_summary(pm)["objective_mean"];
  summary["violation_rate"] = pm.violation_rate;
  summary["wall_time"] = pm.wall_time;

  if (opts.order) {
    const auto& ps = used[primary];
    if (ps.kind == ControllerKind::kScpAffine || ps.kind == ControllerKind::kDC ||
        ps.kind == ControllerKind::kSBSP) {
      const SafMcReport r = compare_saf_vs_mc(ctx.sys, ctx.bank, ps.policy, x0, ctx.dt_ctrl,
                                              ctx.n_steps, cfg.mc.scenarios, seed);
      write_atomic(join(dir, "saf_vs_mc.csv"), provenance_line(cfg, seed) + report_csv(r));
      summary["saf_order"] = *opts.order;
      summary["saf_fraction_inside_ci"] = r.fraction_inside_ci(*opts.order);
    } else {
      err << "warning: --order applies to affine policies only\n";
    }
  }
  write_atomic(join(dir, "summary.json"), summary.dump(2) + "\n");

  if (opts.compare) {
    std::ostringstream csv;
    csv << provenance_line(cfg, seed);
    csv << "approach,objective_mean,objective_stderr,violation_pct,diverged\n";
    std::ostringstream table;
    table << std::left << std::setw(12) << "Approach" << std::right << std::setw(12) << "Time (s)"
          << std::setw(14) << "Objective" << std::setw(16) << "Violation (%)" << "\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& m = results[i];
      std::ostringstream obj;
      obj.precision(17);
      obj << m.objective_mean;
      std::ostringstream se;
      se.precision(17);
      se << m.objective_stderr;
      csv << m.controller << ',' << obj.str() << ',' << se.str() << ','
          << fixed(100.0 * m.violation_rate, 2) << ',' << m.n_diverged << '\n';
      const auto k = used[i].kind;
      const double t = k == ControllerKind::kMPC ? m.solve_seconds_per_run : m.design_seconds;
      table << std::left << std::setw(12) << m.controller << std::right << std::setw(12)
            << (k == ControllerKind::kPI ? std::string("-") : fixed(t, 3)) << std::setw(14)
            << fixed(m.objective_mean, 1) << std::setw(16) << fixed(100.0 * m.violation_rate, 1)
            << "\n";
      write_atomic(join(dir, "metrics_" + file_stem(used[i]) + ".csv"),
                   provenance_line(cfg, seed) + metrics_csv(m));
    }
    write_atomic(join(dir, "comparison.csv"), csv.str());
    write_atomic(join(dir, "comparison.txt"), table.str());
    out << table.str();
  } else {
    out << pm.controller << ": objective " << pm.objective_mean << " +/- " << pm.objective_stderr
        << ", violation " << 100.0 * pm.violation_rate << "%\n";
  }
  write_atomic(join(dir, "run_log.txt"), log.str());
  return kExitOk;
}

int cmd_fp_check(const RunConfig& cfg, const CliOptions& opts, std::ostream& out,
                 std::ostream&) {
  nlohmann::json procs = cfg.fp_processes;
  if (procs.empty()) {
    procs = nlohmann::json::parse(R"([
      {"kind": "gaussian", "a": 0.5, "b": 0.2},
      {"kind": "beta", "a": 2.0, "b": 5.0},
      {"kind": "gamma", "a": 2.0, "b": 4.0},
      {"kind": "laplace", "a": 0.0, "b": 0.05}])");
  }
  FpCheckOptions fo = cfg.fp;
  if (opts.seed) fo.seed = *opts.seed;
  nlohmann::json report = nlohmann::json::array();
  bool all = true;
  for (const auto& e : procs) {
    const FpCheckResult r = fp_check_entry(e, fo);
    all = all && r.passed();
    out << (r.passed() ? "PASS " : "FAIL ") << r.name << ": residual " << r.max_residual
        << ", mean " << r.sample_mean << " (target " << r.target_mean << "), variance "
        << r.sample_variance << " (target " << r.target_variance << ")\n";
    report.push_back({{"name", r.name},
                      {"passed", r.passed()},
                      {"max_residual", r.max_residual},
                      {"residual_ok", r.residual_ok},
                      {"sample_mean", r.sample_mean},
                      {"sample_variance", r.sample_variance},
                      {"target_mean", r.target_mean},
                      {"target_variance", r.target_variance},
                      {"moments_ok", r.moments_ok}});
  }
  const std::string dir = out_dir_of(cfg, opts);
  nlohmann::json doc = {{"provenance", provenance(cfg, fo.seed)}, {"processes", report}};
  write_atomic(join(dir, "fp_check.json"), doc.dump(2) + "\n");
  return all ? kExitOk : kExitError;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic AGC design and validation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  int order = 1;
  bool compare = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--order", order, "SAF truncation order for diagnostics")
        ->check(CLI::IsMember({0, 1}));
  };
  CLI::App* solve_cmd = app.add_subcommand("solve", "Design a policy and write it out");
  CLI::App* validate_cmd = app.add_subcommand("validate", "Monte Carlo closed-loop validation");
  CLI::App* fp_cmd = app.add_subcommand("fp-check", "Stationary Fokker-Planck and moment check");
  add_common(solve_cmd);
  add_common(validate_cmd);
  add_common(fp_cmd);
  validate_cmd->add_flag("--compare", compare, "Run every benchmark controller");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitError;
  }
  auto* active = app.get_subcommands().front();
  CliOptions opts;
  if (active->count("--seed")) opts.seed = seed;
  if (active->count("--out")) opts.out_dir = out_dir;
  if (active->count("--order")) opts.order = order;
  opts.compare = compare;
  try {
    const RunConfig cfg = load_run_config(config);
    if (active == solve_cmd) return cmd_solve(cfg, opts, out, err);
    if (active == validate_cmd) return cmd_validate(cfg, opts, out, err);
    return cmd_fp_check(cfg, opts, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace itoagc
