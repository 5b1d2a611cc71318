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

#include "itoagc/scp.hpp"

#include <algorithm>
#include <cmath>

namespace itoagc {

int ObjectiveWeights::area_index(const LinearSystem& sys) const {
  require(!sys.area_ids.empty(), ErrorCode::kValidationError, "system has no control area");
  if (area == 0) return 0;
  const auto it = std::find(sys.area_ids.begin(), sys.area_ids.end(), area);
  require(it != sys.area_ids.end(), ErrorCode::kValidationError,
          "weights reference unknown area " + std::to_string(area));
  return static_cast<int>(it - sys.area_ids.begin());
}

Matrix ObjectiveWeights::control_weight(int nu) const {
  if (lambda_u.size() == 0) return 7e4 * Matrix::Identity(nu, nu);
  return lambda_u;
}

QuadraticFunctional ObjectiveWeights::running(const LinearSystem& sys) const {
  QuadraticFunctional f = QuadraticFunctional::squared_row(sys.ace_rows[area_index(sys)], lambda_ace);
  f.H.block(sys.u_offset(), sys.u_offset(), sys.nu(), sys.nu()) += control_weight(sys.nu());
  return f;
}

QuadraticFunctional ObjectiveWeights::terminal(const LinearSystem& sys) const {
  return QuadraticFunctional::squared_row(sys.ace_rows[area_index(sys)], mu_ace);
}

void ObjectiveWeights::validate(int nu) const {
  require(lambda_ace >= 0 && mu_ace >= 0 && std::isfinite(lambda_ace) && std::isfinite(mu_ace),
          ErrorCode::kInvalidParameter, "ACE weights must be finite and nonnegative");
  const Matrix lu = control_weight(nu);
  require(lu.rows() == nu && lu.cols() == nu, ErrorCode::kDimensionMismatch,
          "control weight must be " + std::to_string(nu) + "x" + std::to_string(nu));
  require((lu - lu.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * (1 + lu.cwiseAbs().maxCoeff()),
          ErrorCode::kInvalidParameter, "control weight must be symmetric");
  if (nu > 0) {
    const Eigen::SelfAdjointEigenSolver<Matrix> es(lu, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-9, ErrorCode::kInvalidParameter,
            "control weight must be positive semidefinite");
  }
}

Matrix drift_flow(const DisturbanceBank& bank, const Vector& z0, double dt, int n_steps) {
  Matrix z(n_steps + 1, bank.size());
  Vector cur = z0;
  for (int k = 0; k <= n_steps; ++k) {
    z.row(k) = cur.transpose();
    if (k < n_steps) cur += dt * bank.drift(cur);
  }
  return z;
}

namespace {

// Decision-variable indices of the affine policy.
struct PolicyVars {
  int n = 0;
  int nu = 0;
  int nz = 0;
  int u0 = -1;
  std::vector<int> f1;

  int u0_index(int k, int j) const { return u0 + std::min(k, n - 1) * nu + j; }
  bool has_gain() const { return !f1.empty(); }
  int f1_index(int k, int i, int j) const {
    const int g = f1.size() == 1 ? 0 : std::min(k, static_cast<int>(f1.size()) - 1);
    return f1[g] + i * nu + j;
  }
};

PolicyVars add_policy(ConicProgram& prog, int n, int nu, int nz, bool gain, bool per_step) {
  PolicyVars p;
  p.n = n;
  p.nu = nu;
  p.nz = nz;
  p.u0 = prog.add_block("U0", n * nu, VarRole::kPolicy);
  if (gain && nz > 0 && nu > 0) {
    if (per_step) {
      for (int k = 0; k < n; ++k) {
        p.f1.push_back(prog.add_block("F1_" + std::to_string(k), nz * nu, VarRole::kPolicy));
      }
    } else {
      p.f1.push_back(prog.add_block("F1", nz * nu, VarRole::kPolicy));
    }
  }
  prog.policy.n_steps = n;
  prog.policy.nu = nu;
  prog.policy.nz = nz;
  prog.policy.u0_offset = p.u0;
  prog.policy.f1_offsets = p.f1;
  return p;
}

// Square-root factor rows of a PSD weight: W = sum_r rows_r^T rows_r.
Matrix sqrt_rows(const Matrix& w) {
  if (w.size() == 0) return Matrix(0, 0);
  if (w.isDiagonal(0.0)) return w.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(w);
  const double cut = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<RowVector> rows;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev > cut) rows.push_back(std::sqrt(ev) * es.eigenvectors().col(i).transpose());
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), w.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r];
  return out;
}

double epigraph_scale(double expected) { return std::sqrt(std::max(expected, 1.0)); }

double cost_scale_of(double reference) { return std::max(1.0, reference); }

// Shared assembly state for one horizon.
class Builder {
 public:
  // Cost epigraphs are expressed in units of `cost_scale`.
  Builder(const LinearSystem& sys, const ObjectiveWeights& w, double dt, int n, double cost_scale,
          ConicProgram& prog)
      : sys_(sys), prog_(prog), dt_(dt), n_(n), cost_scale_(cost_scale) {
    w.validate(sys.nu());
    const double unit = 1.0 / std::sqrt(cost_scale);
    ace_ = sys.ace_rows[w.area_index(sys)];
    lambda_ = w.lambda_ace;
    mu_ = w.mu_ace;
    lu_ = unit * sqrt_rows(w.control_weight(sys.nu()));
    unit_ = unit;
  }

  // Nominal trajectory variables for one disturbance path.
  struct Nominal {
    int x = -1;  // X_k at x + (k-1) nx + i, k = 1..N
    int z = -1;
    Vector x0;
    Matrix zc;  // constant disturbance path
  };

  Nominal add_nominal(const std::string& tag, const Vector& x0, const Matrix& zc) {
    Nominal nom;
    nom.x = prog_.add_block("X" + tag, n_ * sys_.nx(), VarRole::kState);
    nom.z = prog_.add_block("Z" + tag, n_ * sys_.nz(), VarRole::kState);
    nom.x0 = x0;
    nom.zc = zc;
    return nom;
  }

  AffineExpr x_entry(const Nominal& nom, int k, int i) const {
    if (k == 0) return AffineExpr(nom.x0(i));
    return var_expr(nom.x + (k - 1) * sys_.nx() + i);
  }
  AffineExpr z_entry(const Nominal& nom, int k, int i) const {
    if (k == 0) return AffineExpr(nom.zc(0, i));
    return var_expr(nom.z + (k - 1) * sys_.nz() + i);
  }
  AffineExpr u_entry(const PolicyVars& pv, const Nominal& nom, int k, int j) const {
    AffineExpr e = var_expr(pv.u0_index(k, j));
    if (pv.has_gain()) {
      for (int i = 0; i < sys_.nz(); ++i) {
        if (nom.zc(k, i) != 0.0) e.add(pv.f1_index(k, i, j), nom.zc(k, i));
      }
    }
    return e;
  }
  AffineExpr s_entry(const PolicyVars& pv, const Nominal& nom, int k, int idx) const {
    if (idx < sys_.nx()) return x_entry(nom, k, idx);
    if (idx < sys_.nx() + sys_.nu()) return u_entry(pv, nom, k, idx - sys_.nx());
    return z_entry(nom, k, idx - sys_.nx() - sys_.nu());
  }
  AffineExpr row_nominal(const PolicyVars& pv, const Nominal& nom, int k, const RowVector& phi) const {
    AffineExpr e;
    for (int idx = 0; idx < sys_.ns(); ++idx) {
      if (phi(idx) != 0.0) e.add(s_entry(pv, nom, k, idx), phi(idx));
    }
    e.compress();
    return e;
  }

  void add_nominal_dynamics(const PolicyVars& pv, const Nominal& nom) {
    const int nx = sys_.nx();
    for (int k = 0; k < n_; ++k) {
      for (int i = 0; i < nx; ++i) {
        AffineExpr e = x_entry(nom, k + 1, i);
        e.add(x_entry(nom, k, i), -1.0);
        for (int j = 0; j < nx; ++j) {
          if (sys_.A(i, j) != 0.0) e.add(x_entry(nom, k, j), -dt_ * sys_.A(i, j));
        }
        for (int j = 0; j < sys_.nu(); ++j) {
          if (sys_.B(i, j) != 0.0) e.add(u_entry(pv, nom, k, j), -dt_ * sys_.B(i, j));
        }
        for (int j = 0; j < sys_.nz(); ++j) {
          if (sys_.C(i, j) != 0.0) e.add(z_entry(nom, k, j), -dt_ * sys_.C(i, j));
        }
        e.compress();
        prog_.add_eq(std::move(e), RowRole::kDynamics);
      }
      for (int i = 0; i < sys_.nz(); ++i) {
        prog_.fix(nom.z + k * sys_.nz() + i, nom.zc(k + 1, i), RowRole::kDynamics);
      }
    }
  }

  // f(S_k) for k < N, g(S_N) as per-step epigraphs; returns the sum expression.
  AffineExpr add_nominal_cost(const PolicyVars& pv, const Nominal& nom, const std::string& tag,
                              const Vector& reference) {
    const int w = prog_.add_block("w" + tag, n_ + 1, VarRole::kAuxiliary);
    AffineExpr total;
    for (int k = 0; k <= n_; ++k) {
      std::vector<AffineExpr> v;
      const bool terminal = k == n_;
      const double weight = terminal ? mu_ : lambda_;
      if (weight > 0) v.push_back(row_nominal(pv, nom, k, unit_ * std::sqrt(weight) * ace_));
      if (!terminal) {
        for (Eigen::Index r = 0; r < lu_.rows(); ++r) {
          AffineExpr e;
          for (int j = 0; j < sys_.nu(); ++j) {
            if (lu_(r, j) != 0.0) e.add(u_entry(pv, nom, k, j), lu_(r, j));
          }
          e.compress();
          v.push_back(std::move(e));
        }
      }
      if (v.empty()) {
        prog_.fix(w + k, 0.0);
      } else {
        prog_.add_quad_epigraph(std::move(v), var_expr(w + k), RowRole::kAuxiliary,
                                epigraph_scale(reference(k) / cost_scale_));
      }
      total.add(w + k, terminal ? 1.0 : dt_);
    }
    return total;
  }

  // Sensitivity trajectories with constant Z_hat.
  struct Sensitivity {
    int xh = -1;  // X_hat_k(i, c) at xh + (k-1) nx nz + i nz + c
    int zh = -1;
    std::vector<Matrix> zc;  // Z_hat_k constants
  };

  Sensitivity add_sensitivity(const PolicyVars& pv, const DisturbanceBank& bank, const Matrix& zpath) {
    const int nx = sys_.nx();
    const int nz = sys_.nz();
    Sensitivity sen;
    sen.xh = prog_.add_block("Xhat", n_ * nx * nz, VarRole::kSensitivity);
    sen.zh = prog_.add_block("Zhat", n_ * nz * nz, VarRole::kSensitivity);
    Matrix zh = Matrix::Identity(nz, nz);
    for (int k = 0; k <= n_; ++k) {
      sen.zc.push_back(zh);
      if (k < n_) {
        const Vector slope = bank.drift_slope(zpath.row(k).transpose());
        zh += dt_ * slope.asDiagonal() * zh;
      }
    }
    for (int k = 0; k < n_; ++k) {
      for (int c = 0; c < nz; ++c) {
        for (int i = 0; i < nx; ++i) {
          AffineExpr e = xh_entry(sen, k + 1, i, c);
          e.add(xh_entry(sen, k, i, c), -1.0);
          for (int j = 0; j < nx; ++j) {
            if (sys_.A(i, j) != 0.0) e.add(xh_entry(sen, k, j, c), -dt_ * sys_.A(i, j));
          }
          for (int j = 0; j < sys_.nu(); ++j) {
            if (sys_.B(i, j) != 0.0) e.add(uh_entry(pv, sen, k, j, c), -dt_ * sys_.B(i, j));
          }
          for (int j = 0; j < nz; ++j) {
            if (sys_.C(i, j) != 0.0) e.add(zh_entry(sen, k, j, c), -dt_ * sys_.C(i, j));
          }
          e.compress();
          prog_.add_eq(std::move(e), RowRole::kSensitivity);
        }
        for (int i = 0; i < nz; ++i) {
          prog_.fix(sen.zh + k * nz * nz + i * nz + c, sen.zc[k + 1](i, c), RowRole::kSensitivity);
        }
      }
    }
    return sen;
  }

  AffineExpr xh_entry(const Sensitivity& sen, int k, int i, int c) const {
    if (k == 0) return AffineExpr(0.0);
    return var_expr(sen.xh + (k - 1) * sys_.nx() * sys_.nz() + i * sys_.nz() + c);
  }
  AffineExpr zh_entry(const Sensitivity& sen, int k, int i, int c) const {
    if (k == 0) return AffineExpr(i == c ? 1.0 : 0.0);
    return var_expr(sen.zh + (k - 1) * sys_.nz() * sys_.nz() + i * sys_.nz() + c);
  }
  AffineExpr uh_entry(const PolicyVars& pv, const Sensitivity& sen, int k, int j, int c) const {
    AffineExpr e;
    if (!pv.has_gain()) return e;
    for (int i = 0; i < sys_.nz(); ++i) {
      const double zh = sen.zc[k](i, c);
      if (zh != 0.0) e.add(pv.f1_index(k, i, j), zh);
    }
    return e;
  }
  AffineExpr row_sensitivity(const PolicyVars& pv, const Sensitivity& sen, int k, int c,
                             const RowVector& phi) const {
    AffineExpr e;
    const int nx = sys_.nx();
    const int nu = sys_.nu();
    for (int idx = 0; idx < sys_.ns(); ++idx) {
      if (phi(idx) == 0.0) continue;
      if (idx < nx) {
        e.add(xh_entry(sen, k, idx, c), phi(idx));
      } else if (idx < nx + nu) {
        e.add(uh_entry(pv, sen, k, idx - nx, c), phi(idx));
      } else {
        e.add(zh_entry(sen, k, idx - nx - nu, c), phi(idx));
      }
    }
    e.compress();
    return e;
  }

  // Column-c Hessian quadratic of the running cost: lambda (ace s)^2 + s_u^T Lambda s_u.
  std::vector<AffineExpr> running_factors(const PolicyVars& pv, const Sensitivity& sen, int k,
                                          int c) const {
    std::vector<AffineExpr> v;
    if (lambda_ > 0) {
      v.push_back(row_sensitivity(pv, sen, k, c, unit_ * std::sqrt(lambda_) * ace_));
    }
    for (Eigen::Index r = 0; r < lu_.rows(); ++r) {
      AffineExpr e;
      for (int j = 0; j < sys_.nu(); ++j) {
        if (lu_(r, j) != 0.0) e.add(uh_entry(pv, sen, k, j, c), lu_(r, j));
      }
      e.compress();
      if (!e.terms.empty()) v.push_back(std::move(e));
    }
    return v;
  }

  // Terminal-cost factor row in scaled units.
  RowVector terminal_row() const { return unit_ * std::sqrt(mu_) * ace_; }
  double mu() const { return mu_; }
  double cost_scale() const { return cost_scale_; }
  double dt() const { return dt_; }
  int n() const { return n_; }

 private:
  const LinearSystem& sys_;
  ConicProgram& prog_;
  double dt_;
  int n_;
  double cost_scale_ = 1.0;
  double unit_ = 1.0;
  RowVector ace_;
  double lambda_ = 0.0;
  double mu_ = 0.0;
  Matrix lu_;
};

void check_inputs(const LinearSystem& sys, const ConstraintSet& cset, const Vector& x0,
                  double dt, int n_steps) {
  require(dt > 0, ErrorCode::kInvalidParameter, "dt must be positive");
  require(n_steps >= 1, ErrorCode::kInvalidParameter, "horizon must have a step");
  require(x0.size() == sys.nx(), ErrorCode::kDimensionMismatch,
          "x0 has " + std::to_string(x0.size()) + " entries, system has " +
              std::to_string(sys.nx()) + " states");
  for (const auto& row : cset.rows) {
    require(row.phi.size() == sys.ns(), ErrorCode::kDimensionMismatch,
            "constraint row " + row.label + " does not match the stacked dimension");
  }
}

// Open-loop reference magnitudes used to condition the epigraph cones.
TrajectoryBundle reference_bundle(const LinearSystem& sys, const DisturbanceBank& bank,
                                  const Vector& x0, const Vector& z0, double dt, int n_steps) {
  return propagate(sys, bank, x0, z0, AffinePolicy::zero(n_steps, sys.nu(), sys.nz()), dt, n_steps);
}

Vector reference_costs(const TrajectoryBundle& ref, const QuadraticFunctional& f,
                       const QuadraticFunctional& g) {
  Vector out(ref.steps + 1);
  for (int k = 0; k <= ref.steps; ++k) {
    const Vector s = ref.S.row(k).transpose();
    out(k) = k == ref.steps ? g(s) : f(s);
  }
  return out;
}

void stamp(ConicProgram& prog, const std::string& kind, const LinearSystem& sys,
           const ConstraintSet& cset, int n_steps, int n_scenarios) {
  prog.kind = kind;
  prog.n_steps = n_steps;
  prog.nx = sys.nx();
  prog.nu = sys.nu();
  prog.nz = sys.nz();
  prog.nc = cset.size();
  prog.n_scenarios = n_scenarios;
}

}  // namespace

ConicProgram assemble_scp(const LinearSystem& sys, const DisturbanceBank& bank,
                          const ConstraintSet& cset, const ObjectiveWeights& w,
                          const Vector& x0, const Vector& z0, double dt, int n_steps,
                          const ScpOptions& opts) {
  check_inputs(sys, cset, x0, dt, n_steps);
  require(z0.size() == sys.nz() && bank.size() == sys.nz(), ErrorCode::kDimensionMismatch,
          "disturbance bank does not match the system");
  ConicProgram prog;
  stamp(prog, "scp", sys, cset, n_steps, 1);
  const QuadraticFunctional f = w.running(sys);
  const QuadraticFunctional g = w.terminal(sys);
  const TrajectoryBundle ref = reference_bundle(sys, bank, x0, z0, dt, n_steps);
  Builder bld(sys, w, dt, n_steps, cost_scale_of(eval_saf(ref, f, g, 1).total()), prog);
  const int nz = sys.nz();
  const Matrix zpath = drift_flow(bank, z0, dt, n_steps);
  Matrix sig(n_steps + 1, nz);
  for (int k = 0; k <= n_steps; ++k) sig.row(k) = bank.diffusion_sq(zpath.row(k).transpose()).transpose();

  const auto nom = bld.add_nominal("", x0, zpath);
  const int q = prog.add_block("q", n_steps, VarRole::kEpigraph);
  const int j0 = prog.add_block("J0", 1, VarRole::kObjective);
  const int j1 = prog.add_block("J1", 1, VarRole::kObjective);
  const PolicyVars pv = add_policy(prog, n_steps, sys.nu(), nz, true, opts.per_step_gain);

  bld.add_nominal_dynamics(pv, nom);
  const auto sen = bld.add_sensitivity(pv, bank, zpath);

  // J0 >= sum_k f(S_k) dt + g(S_N).
  AffineExpr cost = bld.add_nominal_cost(pv, nom, "", reference_costs(ref, f, g));
  cost.add(j0, -1.0);
  prog.add_le(std::move(cost), RowRole::kObjective);

  // e_{s,c} >= column-c running Hessian quadratic; g_{t,c} >= terminal one.
  std::vector<std::vector<int>> e_idx(n_steps, std::vector<int>(nz, -1));
  std::vector<std::vector<int>> g_idx(n_steps, std::vector<int>(nz, -1));
  for (int c = 0; c < nz; ++c) {
    double tail = 0.0;  // sum of sigma^2 over t > s
    for (int s = n_steps - 1; s >= 0; --s) {
      if (tail > 0) {
        auto v = bld.running_factors(pv, sen, s, c);
        if (!v.empty()) {
          const Vector sh = ref.S_hat[s].col(c);
          const int var = prog.add_block("e_" + std::to_string(s) + "_" + std::to_string(c), 1,
                                         VarRole::kAuxiliary);
          prog.add_quad_epigraph(std::move(v), var_expr(var), RowRole::kAuxiliary,
                                 epigraph_scale(sh.dot(f.H * sh) / bld.cost_scale()));
          e_idx[s][c] = var;
        }
      }
      tail += sig(s, c);
      if (sig(s, c) > 0 && bld.mu() > 0) {
        std::vector<AffineExpr> v{
            bld.row_sensitivity(pv, sen, s, c, bld.terminal_row())};
        if (!v.front().terms.empty()) {
          const Vector sh = ref.S_hat[s].col(c);
          const int var = prog.add_block("g_" + std::to_string(s) + "_" + std::to_string(c), 1,
                                         VarRole::kAuxiliary);
          prog.add_quad_epigraph(std::move(v), var_expr(var), RowRole::kAuxiliary,
                                 epigraph_scale(sh.dot(g.H * sh) / bld.cost_scale()));
          g_idx[s][c] = var;
        }
      }
    }
  }
  // Running sums a_{t,c} = sum_{s<t} e_{s,c} keep every epigraph row short.
  std::vector<std::vector<int>> a_idx(n_steps, std::vector<int>(nz, -1));
  for (int c = 0; c < nz; ++c) {
    int prev = -1;
    for (int t = 1; t < n_steps; ++t) {
      if (prev < 0 && e_idx[t - 1][c] < 0) continue;
      const int var = prog.add_block("a_" + std::to_string(t) + "_" + std::to_string(c), 1,
                                     VarRole::kAuxiliary);
      AffineExpr def = var_expr(var, -1.0);
      if (prev >= 0) def.add(prev, 1.0);
      if (e_idx[t - 1][c] >= 0) def.add(e_idx[t - 1][c], 1.0);
      prog.add_eq(std::move(def), RowRole::kAuxiliary);
      a_idx[t][c] = var;
      prev = var;
    }
  }
  // q_t >= sum_c sigma^2_{t,c} (2 dt sum_{s<t} e_{s,c} + 2 g_{t,c}).
  for (int t = 0; t < n_steps; ++t) {
    AffineExpr row = var_expr(q + t, -1.0);
    for (int c = 0; c < nz; ++c) {
      const double s2 = sig(t, c);
      if (s2 == 0.0) continue;
      if (a_idx[t][c] >= 0) row.add(a_idx[t][c], 2.0 * dt * s2);
      if (g_idx[t][c] >= 0) row.add(g_idx[t][c], 2.0 * s2);
    }
    prog.add_le(std::move(row), RowRole::kEpigraph);
  }
  // J1 = 0.5 dt sum_t q_t.
  AffineExpr j1_row = var_expr(j1);
  for (int t = 0; t < n_steps; ++t) j1_row.add(q + t, -0.5 * dt);
  prog.add_eq(std::move(j1_row), RowRole::kObjective);

  // phi S_t + kappa sqrt(var_t) <= bound. The radius over steps s < t is
  // split into completed blocks of `block` steps, each bounded by its own
  // cone, plus the entries of the current partial block.
  const double kappa = cset.kappa;
  const int block = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_steps)))));
  for (const auto& row : cset.rows) {
    auto entries = [&](int s) {
      std::vector<AffineExpr> out;
      for (int c = 0; c < nz; ++c) {
        const double s2 = sig(s, c);
        if (s2 <= 0.0 || kappa == 0.0) continue;
        AffineExpr e = bld.row_sensitivity(pv, sen, s, c, kappa * std::sqrt(dt * s2) * row.phi);
        if (!e.terms.empty()) out.push_back(std::move(e));
      }
      return out;
    };
    std::vector<AffineExpr> closed;  // radii of completed blocks
    std::vector<AffineExpr> open;    // entries of the current block
    for (int t = 1; t <= n_steps; ++t) {
      for (auto& e : entries(t - 1)) open.push_back(std::move(e));
      if (t % block == 0 && t < n_steps && !open.empty()) {
        const int r = prog.add_block("r_" + row.label + "_" + std::to_string(t), 1,
                                     VarRole::kAuxiliary);
        prog.add_soc(std::move(open), var_expr(r), RowRole::kAuxiliary);
        open.clear();
        closed.push_back(var_expr(r));
      }
      AffineExpr lim = bld.row_nominal(pv, nom, t, row.phi);
      lim.constant -= row.bound;
      std::vector<AffineExpr> v = closed;
      v.insert(v.end(), open.begin(), open.end());
      if (v.empty()) {
        prog.add_le(std::move(lim), RowRole::kLimit);
      } else {
        AffineExpr slack;
        slack.add(lim, -1.0);
        prog.add_soc(std::move(v), std::move(slack), RowRole::kLimit);
      }
    }
  }

  AffineExpr obj = var_expr(j0, bld.cost_scale());
  obj.add(j1, bld.cost_scale());
  prog.set_objective(std::move(obj));
  return prog;
}

ConicProgram assemble_scenario_program(const LinearSystem& sys, const ConstraintSet& cset,
                                       const ObjectiveWeights& w, const Vector& x0,
                                       const std::vector<Matrix>& z_paths, double dt,
                                       int n_steps, const ScpOptions& opts) {
  check_inputs(sys, cset, x0, dt, n_steps);
  require(!z_paths.empty(), ErrorCode::kInvalidParameter, "scenario program needs a path");
  for (const auto& p : z_paths) {
    require(p.rows() == n_steps + 1 && p.cols() == sys.nz(), ErrorCode::kDimensionMismatch,
            "scenario path must be (N_t+1) x N_z");
  }
  const int ns = static_cast<int>(z_paths.size());
  ConicProgram prog;
  stamp(prog, ns == 1 ? "dc" : "sbsp", sys, cset, n_steps, ns);
  const QuadraticFunctional f = w.running(sys);
  const QuadraticFunctional g = w.terminal(sys);
  // Open-loop costs along each path.
  std::vector<Vector> refc(ns, Vector(n_steps + 1));
  double mean_cost = 0.0;
  for (int s = 0; s < ns; ++s) {
    Vector x = x0;
    const Vector u = Vector::Zero(sys.nu());
    for (int k = 0; k <= n_steps; ++k) {
      const Vector z = z_paths[s].row(k).transpose();
      const Vector st = sys.stack(x, u, z);
      refc[s](k) = k == n_steps ? g(st) : f(st);
      mean_cost += (k == n_steps ? 1.0 : dt) * refc[s](k) / ns;
      if (k < n_steps) x += dt * sys.rhs(x, u, z);
    }
  }
  Builder bld(sys, w, dt, n_steps, cost_scale_of(mean_cost), prog);

  std::vector<Builder::Nominal> noms;
  for (int s = 0; s < ns; ++s) {
    noms.push_back(bld.add_nominal(ns == 1 ? "" : "_" + std::to_string(s), x0, z_paths[s]));
  }
  const int j0 = prog.add_block("J0", ns, VarRole::kObjective);
  const PolicyVars pv = add_policy(prog, n_steps, sys.nu(), sys.nz(), opts.include_gain,
                                   opts.per_step_gain);
  AffineExpr obj;
  for (int s = 0; s < ns; ++s) {
    const auto& nom = noms[s];
    bld.add_nominal_dynamics(pv, nom);
    AffineExpr cost = bld.add_nominal_cost(pv, nom, ns == 1 ? "" : "_" + std::to_string(s), refc[s]);
    cost.add(j0 + s, -1.0);
    prog.add_le(std::move(cost), RowRole::kObjective);
    for (const auto& row : cset.rows) {
      for (int t = 1; t <= n_steps; ++t) {
        AffineExpr lim = bld.row_nominal(pv, nom, t, row.phi);
        lim.constant -= row.bound;
        prog.add_le(std::move(lim), RowRole::kLimit);
      }
    }
    obj.add(j0 + s, bld.cost_scale() / ns);
  }
  prog.set_objective(std::move(obj));
  return prog;
}

ConicProgram assemble_deterministic(const LinearSystem& sys, const DisturbanceBank& bank,
                                    const ConstraintSet& cset, const ObjectiveWeights& w,
                                    const Vector& x0, const Vector& z0, double dt,
                                    int n_steps, const ScpOptions& opts) {
  require(z0.size() == sys.nz() && bank.size() == sys.nz(), ErrorCode::kDimensionMismatch,
          "disturbance bank does not match the system");
  require(dt > 0, ErrorCode::kInvalidParameter, "dt must be positive");
  require(n_steps >= 1, ErrorCode::kInvalidParameter, "horizon must have a step");
  return assemble_scenario_program(sys, cset, w, x0, {drift_flow(bank, z0, dt, n_steps)}, dt,
                                   n_steps, opts);
}

ProblemSize count_problem_size(const ConicProgram& prog) {
  ProblemSize size;
  for (const auto& b : prog.blocks()) {
    switch (b.role) {
      case VarRole::kState:
      case VarRole::kSensitivity:
      case VarRole::kEpigraph:
        size.n_vars += b.size;
        break;
      case VarRole::kPolicy:
        size.n_policy += b.size;
        break;
      case VarRole::kObjective:
      case VarRole::kAuxiliary:
        size.n_auxiliary += b.size;
        break;
    }
  }
  auto tally = [&](RowRole role) {
    switch (role) {
      case RowRole::kDynamics:
      case RowRole::kSensitivity:
        ++size.n_eq;
        break;
      case RowRole::kLimit:
        ++size.n_soc;
        break;
      case RowRole::kEpigraph:
      case RowRole::kObjective:
        ++size.n_epigraph;
        break;
      case RowRole::kAuxiliary:
        break;
    }
  };
  for (const auto& r : prog.equalities()) tally(r.role);
  for (const auto& r : prog.inequalities()) tally(r.role);
  for (const auto& r : prog.socs()) tally(r.role);
  for (const auto& r : prog.epigraphs()) tally(r.role);
  return size;
}

nlohmann::json to_json(const ProblemSize& size) {
  return {{"n_vars", size.n_vars},       {"n_policy", size.n_policy},
          {"n_auxiliary", size.n_auxiliary}, {"n_eq", size.n_eq},
          {"n_soc", size.n_soc},         {"n_epigraph", size.n_epigraph},
          {"n_constraints", size.n_constraints()}};
}

AffinePolicy extract_policy(const ConicProgram& prog, const Vector& x) {
  const PolicyLayout& lay = prog.policy;
  require(lay.u0_offset >= 0, ErrorCode::kInvalidParameter, "program has no policy block");
  require(x.size() == prog.n_vars(), ErrorCode::kDimensionMismatch, "point has wrong dimension");
  AffinePolicy p;
  p.U0.resize(lay.n_steps, lay.nu);
  for (int k = 0; k < lay.n_steps; ++k) {
    for (int j = 0; j < lay.nu; ++j) p.U0(k, j) = x(lay.u0_offset + k * lay.nu + j);
  }
  if (lay.f1_offsets.empty()) {
    p.F1.push_back(Matrix::Zero(lay.nz, lay.nu));
  } else {
    for (int off : lay.f1_offsets) {
      Matrix f(lay.nz, lay.nu);
      for (int i = 0; i < lay.nz; ++i) {
        for (int j = 0; j < lay.nu; ++j) f(i, j) = x(off + i * lay.nu + j);
      }
      p.F1.push_back(std::move(f));
    }
  }
  return p;
}

Solution solve(const ConicProgram& prog, ConicBackend& backend, const SolverOptions& opts) {
  const StandardForm sf = prog.lower();
  const ConeSolution cs = backend.solve(sf, opts);
  Solution sol;
  sol.status = cs.status;
  sol.iterations = cs.iterations;
  sol.seconds = cs.seconds;
  sol.message = backend.name() + ": " + cs.message;
  sol.y = cs.y;
  sol.z = cs.z;
  if (cs.x.size() == prog.n_vars()) {
    sol.x = cs.x;
    sol.violation = prog.check(cs.x);
    sol.objective = prog.objective_value(cs.x);
    if (prog.policy.u0_offset >= 0 && cs.x.allFinite()) sol.policy = extract_policy(prog, cs.x);
  }
  if (sol.status == SolveStatus::kOptimal) {
    const double worst = sol.violation.worst();
    if (!(worst <= kResubstitutionTol)) {
      sol.status = SolveStatus::kNumericalFailure;
      sol.message += "; re-substitution violation " + std::to_string(worst);
    }
  }
  return sol;
}

}  // namespace itoagc
