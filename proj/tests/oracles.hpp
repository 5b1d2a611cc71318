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

// Reference computations written independently of the library internals.

#pragma once

#include <cmath>
#include <vector>

#include "itoagc/saf.hpp"

namespace itoagc::oracle {

/// System whose stacked vector is just Z (no states, no inputs).
inline LinearSystem disturbance_only_system(int nz) {
  LinearSystem sys;
  sys.A = Matrix::Zero(0, 0);
  sys.B = Matrix::Zero(0, 0);
  sys.C = Matrix::Zero(0, nz);
  sys.freq_row = RowVector::Zero(nz);
  sys.input_share = Vector::Zero(0);
  return sys;
}

/// mu(z) = -z, sigma^2 = 2 for every component.
inline DisturbanceBank ou_bank(int nz) {
  std::vector<ItoProcess1D> procs(nz, make_standard_process(ProcessKind::kGaussian, 0.0, 1.0));
  return DisturbanceBank(procs, std::vector<int>(nz, 0), Vector::Zero(nz));
}

/// Classical RK4 on xdot = A x + C z, zdot = slope * z with u = 0 and a
/// single disturbance.
inline Matrix rk4_open_loop(const LinearSystem& sys, const Vector& x0, double z0, double slope,
                            double dt, int n) {
  const int nx = static_cast<int>(x0.size());
  Vector y(nx + 1);
  y << x0, z0;
  auto rhs = [&](const Vector& v) {
    Vector d(nx + 1);
    d.head(nx) = sys.A * v.head(nx) + sys.C.col(0) * v(nx);
    d(nx) = slope * v(nx);
    return d;
  };
  Matrix out(n + 1, nx);
  out.row(0) = x0.transpose();
  for (int k = 0; k < n; ++k) {
    const Vector k1 = rhs(y);
    const Vector k2 = rhs(y + 0.5 * dt * k1);
    const Vector k3 = rhs(y + 0.5 * dt * k2);
    const Vector k4 = rhs(y + dt * k3);
    y += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    out.row(k + 1) = y.head(nx).transpose();
  }
  return out;
}

/// Max |S_hat - centered difference of S_tilde in z0| over all points.
inline double max_fd_sensitivity_error(const LinearSystem& sys, const DisturbanceBank& bank,
                                       const Vector& x0, const Vector& z0,
                                       const AffinePolicy& policy, double dt, int n, double h) {
  const auto b = propagate(sys, bank, x0, z0, policy, dt, n);
  double worst = 0.0;
  for (int j = 0; j < z0.size(); ++j) {
    Vector zp = z0;
    Vector zm = z0;
    zp(j) += h;
    zm(j) -= h;
    const auto bp = propagate_nominal(sys, bank, x0, zp, policy, dt, n);
    const auto bm = propagate_nominal(sys, bank, x0, zm, policy, dt, n);
    for (int k = 0; k <= n; ++k) {
      const Vector fd = (bp.S.row(k) - bm.S.row(k)).transpose() / (2 * h);
      worst = std::max(worst, (fd - b.S_hat[k].col(j)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

/// Noise-free Euler simulation with u = 0 and a single linear-drift disturbance.
inline double deterministic_cost(const LinearSystem& sys, double slope, const Vector& x0,
                                 double z0, const QuadraticFunctional& f,
                                 const QuadraticFunctional& g, double dt, int n) {
  Vector x = x0;
  double z = z0;
  double cost = 0.0;
  auto stacked = [&] {
    Vector s = Vector::Zero(sys.ns());
    s.head(sys.nx()) = x;
    s(sys.ns() - 1) = z;
    return s;
  };
  for (int k = 0; k < n; ++k) {
    cost += dt * f(stacked());
    const Vector dx = sys.A * x + sys.C.col(0) * z;
    z += dt * slope * z;
    x += dt * dx;
  }
  return cost + g(stacked());
}

struct LqgCase {
  LinearSystem sys;
  DisturbanceBank bank;
  Vector x0;
  Vector z0;
  QuadraticFunctional f;
  QuadraticFunctional g;
  double dt = 1e-3;
  int steps = 2000;
};

/// Two states driven by one Ornstein-Uhlenbeck source (sigma^2 = 2).
inline LqgCase two_state_lqg() {
  LqgCase c;
  c.sys.A.resize(2, 2);
  c.sys.A << -0.5, 1.0, -1.0, -0.3;
  c.sys.B = Matrix::Zero(2, 0);
  c.sys.C.resize(2, 1);
  c.sys.C << 1.0, 0.5;
  c.sys.freq_row = RowVector::Zero(3);
  c.bank = ou_bank(1);
  c.x0.resize(2);
  c.x0 << 1.0, -0.5;
  c.z0 = Vector::Constant(1, 0.5);
  c.f = QuadraticFunctional::zero(3);
  c.f.H << 2.0, 0.3, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 0.5;
  c.f.g << 0.1, 0.0, -0.2;
  c.g = QuadraticFunctional::zero(3);
  c.g.H << 1.0, 0.0, 0.2, 0.0, 3.0, 0.0, 0.2, 0.0, 1.0;
  c.g.c = 0.25;
  return c;
}

/// Exact first and second moments of the Euler-Maruyama recursion of
/// Y = [X; Z]: m' = M m, P' = M P M^T + Q dt.
inline double lyapunov_cost(const LqgCase& c) {
  const int nx = c.sys.nx();
  const int n = nx + 1;
  Matrix m_mat = Matrix::Identity(n, n);
  m_mat.topLeftCorner(nx, nx) += c.dt * c.sys.A;
  m_mat.topRightCorner(nx, 1) = c.dt * c.sys.C;
  m_mat(nx, nx) += c.dt * -1.0;
  Matrix q = Matrix::Zero(n, n);
  q(nx, nx) = 2.0;
  Vector mean(n);
  mean << c.x0, c.z0;
  Matrix cov = Matrix::Zero(n, n);
  auto expect = [&](const QuadraticFunctional& h) {
    return mean.dot(h.H * mean) + (h.H * cov).trace() + h.g.dot(mean) + h.c;
  };
  double cost = 0.0;
  for (int k = 0; k < c.steps; ++k) {
    cost += c.dt * expect(c.f);
    mean = m_mat * mean;
    cov = m_mat * cov * m_mat.transpose() + q * c.dt;
  }
  return cost + expect(c.g);
}

}  // namespace itoagc::oracle
