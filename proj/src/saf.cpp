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

#include "itoagc/saf.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>

namespace itoagc {

AffinePolicy AffinePolicy::zero(int n_steps, int nu, int nz) {
  return constant(Matrix::Zero(n_steps, nu), Matrix::Zero(nz, nu));
}

AffinePolicy AffinePolicy::constant(const Matrix& u0, const Matrix& f1) {
  AffinePolicy p;
  p.U0 = u0;
  p.F1 = {f1};
  return p;
}

const Matrix& AffinePolicy::gain(int k) const {
  if (F1.size() == 1) return F1.front();
  const int last = static_cast<int>(F1.size()) - 1;
  return F1.at(std::clamp(k, 0, last));
}

Vector AffinePolicy::feedforward(int k) const {
  if (U0.rows() == 0) return Vector::Zero(U0.cols());
  return U0.row(std::clamp(k, 0, horizon() - 1)).transpose();
}

Vector AffinePolicy::control(int k, const Vector& z) const {
  Vector u = feedforward(k);
  if (nz() > 0 && nu() > 0) u.noalias() += gain(k).transpose() * z;
  return u;
}

void AffinePolicy::validate(int n_steps, int nu, int nz) const {
  require(U0.rows() == n_steps && U0.cols() == nu, ErrorCode::kDimensionMismatch,
          "policy U0 must be " + std::to_string(n_steps) + "x" + std::to_string(nu));
  require(F1.size() == 1 || static_cast<int>(F1.size()) == n_steps,
          ErrorCode::kDimensionMismatch, "policy F1 must be one matrix or one per step");
  for (const auto& f : F1) {
    require(f.rows() == nz && f.cols() == nu, ErrorCode::kDimensionMismatch,
            "policy F1 must be " + std::to_string(nz) + "x" + std::to_string(nu));
    require(f.allFinite(), ErrorCode::kDimensionMismatch, "policy F1 is not finite");
  }
  require(U0.allFinite(), ErrorCode::kDimensionMismatch, "policy U0 is not finite");
}

QuadraticFunctional QuadraticFunctional::zero(int n) {
  return {Matrix::Zero(n, n), Vector::Zero(n), 0.0};
}

QuadraticFunctional QuadraticFunctional::constant(int n, double c) {
  auto q = zero(n);
  q.c = c;
  return q;
}

QuadraticFunctional QuadraticFunctional::squared_row(const RowVector& row, double weight) {
  const auto n = static_cast<int>(row.size());
  auto q = zero(n);
  q.H = weight * row.transpose() * row;
  return q;
}

double QuadraticFunctional::operator()(const Vector& s) const {
  return s.dot(H * s) + g.dot(s) + c;
}

QuadraticFunctional& QuadraticFunctional::operator+=(const QuadraticFunctional& other) {
  require(other.dim() == dim(), ErrorCode::kDimensionMismatch,
          "quadratic functionals differ in dimension");
  H += other.H;
  g += other.g;
  c += other.c;
  return *this;
}

void QuadraticFunctional::validate() const {
  require(H.rows() == H.cols() && g.size() == H.rows(), ErrorCode::kDimensionMismatch,
          "quadratic functional shapes are inconsistent");
  require((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1 + H.cwiseAbs().maxCoeff()),
          ErrorCode::kInvalidParameter, "quadratic form is not symmetric");
  if (H.rows() == 0) return;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() >= -1e-9, ErrorCode::kInvalidParameter,
          "quadratic form is not positive semidefinite");
}

TrajectoryBundle propagate_nominal(const LinearSystem& sys, const DisturbanceBank& bank,
                                   const Vector& x0, const Vector& z0,
                                   const AffinePolicy& policy, double dt, int n_steps) {
  require(dt > 0, ErrorCode::kInvalidParameter, "dt must be positive");
  require(n_steps >= 1, ErrorCode::kInvalidParameter, "horizon must have a step");
  require(x0.size() == sys.nx() && z0.size() == sys.nz() && bank.size() == sys.nz(),
          ErrorCode::kDimensionMismatch, "initial state does not match the system");
  policy.validate(n_steps, sys.nu(), sys.nz());

  TrajectoryBundle b;
  b.dt = dt;
  b.steps = n_steps;
  b.Z.resize(n_steps + 1, sys.nz());
  b.X.resize(n_steps + 1, sys.nx());
  b.S.resize(n_steps + 1, sys.ns());
  b.sigma_sq.resize(n_steps + 1, sys.nz());
  Vector x = x0;
  Vector z = z0;
  for (int k = 0; k <= n_steps; ++k) {
    const Vector u = policy.control(k, z);
    b.Z.row(k) = z.transpose();
    b.X.row(k) = x.transpose();
    b.S.row(k) = sys.stack(x, u, z).transpose();
    b.sigma_sq.row(k) = bank.diffusion_sq(z).transpose();
    if (k == n_steps) break;
    const Vector dx = sys.rhs(x, u, z);
    z += dt * bank.drift(z);
    x += dt * dx;
  }
  return b;
}

void propagate_sensitivity(const LinearSystem& sys, const DisturbanceBank& bank,
                           TrajectoryBundle& b, const AffinePolicy& policy) {
  const int nz = sys.nz();
  const int n = b.steps;
  b.Z_hat.assign(n + 1, Matrix());
  b.X_hat.assign(n + 1, Matrix());
  b.S_hat.assign(n + 1, Matrix());
  Matrix zh = Matrix::Identity(nz, nz);
  Matrix xh = Matrix::Zero(sys.nx(), nz);
  for (int k = 0; k <= n; ++k) {
    const Matrix uh = policy.gain(k).transpose() * zh;
    b.Z_hat[k] = zh;
    b.X_hat[k] = xh;
    Matrix sh(sys.ns(), nz);
    sh << xh, uh, zh;
    b.S_hat[k] = std::move(sh);
    if (k == n) break;
    Matrix dxh = sys.A * xh;
    if (sys.nu() > 0) dxh.noalias() += sys.B * uh;
    dxh.noalias() += sys.C * zh;
    const Vector slope = bank.drift_slope(b.Z.row(k).transpose());
    zh += b.dt * slope.asDiagonal() * zh;
    xh += b.dt * dxh;
  }
}

TrajectoryBundle propagate(const LinearSystem& sys, const DisturbanceBank& bank,
                           const Vector& x0, const Vector& z0,
                           const AffinePolicy& policy, double dt, int n_steps) {
  auto b = propagate_nominal(sys, bank, x0, z0, policy, dt, n_steps);
  propagate_sensitivity(sys, bank, b, policy);
  return b;
}

double eval_daf0(const TrajectoryBundle& b, const QuadraticFunctional& f,
                 const QuadraticFunctional& g) {
  double acc = 0.0;
  for (int k = 0; k < b.steps; ++k) acc += f(b.S.row(k).transpose()) * b.dt;
  return acc + g(b.S.row(b.steps).transpose());
}

std::vector<Matrix> eval_hessian_l(const TrajectoryBundle& b, const QuadraticFunctional& f,
                                   const QuadraticFunctional& g) {
  require(b.has_sensitivity(), ErrorCode::kInvalidParameter,
          "bundle has no sensitivity trajectories");
  std::vector<Matrix> l(b.steps + 1);
  const int nz = static_cast<int>(b.Z.cols());
  Matrix running = Matrix::Zero(nz, nz);
  for (int k = 0; k <= b.steps; ++k) {
    const Matrix& sh = b.S_hat[k];
    l[k] = running + 2.0 * sh.transpose() * g.H * sh;
    l[k] = 0.5 * (l[k] + l[k].transpose());
    running.noalias() += 2.0 * b.dt * sh.transpose() * f.H * sh;
  }
  return l;
}

double eval_daf1(const TrajectoryBundle& b, const std::vector<Matrix>& l) {
  double acc = 0.0;
  for (int k = 0; k < b.steps; ++k) {
    acc += 0.5 * b.sigma_sq.row(k).dot(l[k].diagonal()) * b.dt;
  }
  return acc;
}

SafValue eval_saf(const TrajectoryBundle& b, const QuadraticFunctional& f,
                  const QuadraticFunctional& g, int order) {
  require(order == 0 || order == 1, ErrorCode::kInvalidParameter,
          "series truncation order must be 0 or 1");
  SafValue v;
  v.order0 = eval_daf0(b, f, g);
  if (order == 1) v.order1 = eval_daf1(b, eval_hessian_l(b, f, g));
  return v;
}

Vector eval_mean(const TrajectoryBundle& b, const RowVector& phi) {
  return b.S * phi.transpose();
}

Vector eval_variance(const TrajectoryBundle& b, const RowVector& phi) {
  require(b.has_sensitivity(), ErrorCode::kInvalidParameter,
          "bundle has no sensitivity trajectories");
  Vector var(b.steps + 1);
  double acc = 0.0;
  for (int k = 0; k <= b.steps; ++k) {
    var(k) = acc;
    const RowVector proj = phi * b.S_hat[k];
    acc += b.dt * b.sigma_sq.row(k).dot(proj.cwiseAbs2());
  }
  return var;
}

namespace {

void write_matrix(const std::filesystem::path& path, const Matrix& m, double dt) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIoError, "cannot write " + path.string());
  out << std::setprecision(17) << "t";
  for (Eigen::Index j = 0; j < m.cols(); ++j) out << ",c" << j;
  out << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << static_cast<double>(i) * dt;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << "," << m(i, j);
    out << "\n";
  }
}

}  // namespace

void write_bundle_csv(const TrajectoryBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_matrix(fs::path(dir) / "Z.csv", b.Z, b.dt);
  write_matrix(fs::path(dir) / "X.csv", b.X, b.dt);
  write_matrix(fs::path(dir) / "S.csv", b.S, b.dt);
  write_matrix(fs::path(dir) / "sigma_sq.csv", b.sigma_sq, b.dt);
  if (!b.has_sensitivity()) return;
  // Row k holds S_hat_k flattened column by column.
  const auto ns = b.S_hat.front().size();
  Matrix flat(b.steps + 1, ns);
  for (int k = 0; k <= b.steps; ++k) {
    flat.row(k) = Eigen::Map<const RowVector>(b.S_hat[k].data(), ns);
  }
  write_matrix(fs::path(dir) / "S_hat.csv", flat, b.dt);
}

}  // namespace itoagc
