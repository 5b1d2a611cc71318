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

#include "itoagc/common.hpp"
#include "itoagc/disturbance.hpp"
#include "itoagc/grid.hpp"

namespace itoagc {

/// u_k = U0_k + F1_k^T z_k. U0 has one row per control step; the terminal
/// point k = N_t reuses the last row. F1 is stored N_z x N_u, either once
/// (time-invariant) or once per step.
struct AffinePolicy {
  Matrix U0;
  std::vector<Matrix> F1;

  static AffinePolicy zero(int n_steps, int nu, int nz);
  static AffinePolicy constant(const Matrix& u0, const Matrix& f1);

  int horizon() const { return static_cast<int>(U0.rows()); }
  int nu() const { return static_cast<int>(U0.cols()); }
  int nz() const { return F1.empty() ? 0 : static_cast<int>(F1.front().rows()); }
  bool time_varying() const { return F1.size() > 1; }

  const Matrix& gain(int k) const;
  Vector feedforward(int k) const;
  Vector control(int k, const Vector& z) const;
  /// Throws dimension-mismatch on inconsistent shapes or non-finite entries.
  void validate(int n_steps, int nu, int nz) const;
};

/// Nominal and sensitivity trajectories on points k = 0..N_t.
struct TrajectoryBundle {
  double dt = 0.0;
  int steps = 0;
  Matrix Z;         // (N_t+1) x N_z
  Matrix X;         // (N_t+1) x N_x
  Matrix S;         // (N_t+1) x N_s
  Matrix sigma_sq;  // (N_t+1) x N_z, diffusion along Z
  std::vector<Matrix> Z_hat;  // N_z x N_z per point
  std::vector<Matrix> X_hat;  // N_x x N_z per point
  std::vector<Matrix> S_hat;  // N_s x N_z per point

  bool has_sensitivity() const { return !S_hat.empty(); }
  double horizon() const { return dt * steps; }
};

/// s -> s^T H s + g^T s + c.
struct QuadraticFunctional {
  Matrix H;
  Vector g;
  double c = 0.0;

  static QuadraticFunctional zero(int n);
  static QuadraticFunctional constant(int n, double c);
  /// weight * (row s)^2.
  static QuadraticFunctional squared_row(const RowVector& row, double weight);

  double operator()(const Vector& s) const;
  int dim() const { return static_cast<int>(H.rows()); }
  QuadraticFunctional& operator+=(const QuadraticFunctional& other);
  /// Symmetric and H >= -1e-9 in the eigenvalue sense.
  void validate() const;
};

TrajectoryBundle propagate_nominal(const LinearSystem& sys, const DisturbanceBank& bank,
                                   const Vector& x0, const Vector& z0,
                                   const AffinePolicy& policy, double dt, int n_steps);

/// Fills Z_hat, X_hat, S_hat of a bundle produced by propagate_nominal.
void propagate_sensitivity(const LinearSystem& sys, const DisturbanceBank& bank,
                           TrajectoryBundle& bundle, const AffinePolicy& policy);

TrajectoryBundle propagate(const LinearSystem& sys, const DisturbanceBank& bank,
                           const Vector& x0, const Vector& z0,
                           const AffinePolicy& policy, double dt, int n_steps);

/// Order-0 term: sum_{k<N_t} f(S_k) dt + g(S_{N_t}).
double eval_daf0(const TrajectoryBundle& b, const QuadraticFunctional& f,
                 const QuadraticFunctional& g);

/// l_k = sum_{s<k} S_hat_s^T (2 H_f) S_hat_s dt + S_hat_k^T (2 H_g) S_hat_k.
std::vector<Matrix> eval_hessian_l(const TrajectoryBundle& b, const QuadraticFunctional& f,
                                   const QuadraticFunctional& g);

/// Order-1 term: sum_{k<N_t} 0.5 sum_i sigma_sq_{k,i} [l_k]_ii dt.
double eval_daf1(const TrajectoryBundle& b, const std::vector<Matrix>& l);

struct SafValue {
  double order0 = 0.0;
  double order1 = 0.0;
  double total() const { return order0 + order1; }
};

/// Value of the assessment function truncated at `order` (0 or 1).
SafValue eval_saf(const TrajectoryBundle& b, const QuadraticFunctional& f,
                  const QuadraticFunctional& g, int order = 1);

/// phi^T S_k for every point.
Vector eval_mean(const TrajectoryBundle& b, const RowVector& phi);

/// var_k = dt sum_{s<k} sum_i sigma_sq_{s,i} (phi^T S_hat_s e_i)^2.
Vector eval_variance(const TrajectoryBundle& b, const RowVector& phi);

/// One CSV per trajectory block (Z, X, S, sigma_sq, S_hat) in `dir`.
void write_bundle_csv(const TrajectoryBundle& b, const std::string& dir);

}  // namespace itoagc
