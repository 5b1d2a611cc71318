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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <vector>

#include <Eigen/SparseCholesky>

#include "itoagc/conic.hpp"

namespace itoagc {

// Operator splitting on  min c^T x  s.t.  M x + s = q,  s in {0}^p x K,
// with M = [A; G] and q = [b; h]. The iterate y is the negated multiplier.
ConeSolution AdmmBackend::solve(const StandardForm& prob, const SolverOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = prob.n();
  const int p = prob.p();
  const int m = prob.m();
  const int rows = p + m;

  std::vector<Triplet> mt;
  for (int k = 0; k < n; ++k) {
    for (SparseMatrix::InnerIterator it(prob.A, k); it; ++it) mt.emplace_back(it.row(), k, it.value());
    for (SparseMatrix::InnerIterator it(prob.G, k); it; ++it) mt.emplace_back(p + it.row(), k, it.value());
  }
  SparseMatrix mm(rows, n);
  mm.setFromTriplets(mt.begin(), mt.end());
  Vector q(rows);
  q << prob.b, prob.h;

  const double rho = params_.rho;
  const double sigma = params_.sigma;
  // Equality rows get a much stiffer penalty.
  Vector rho_vec = Vector::Constant(rows, rho);
  rho_vec.head(p).setConstant(rho * 1e3);

  std::vector<Triplet> kt;
  for (int i = 0; i < n; ++i) kt.emplace_back(i, i, sigma);
  for (int k = 0; k < n; ++k) {
    for (SparseMatrix::InnerIterator it(mm, k); it; ++it) kt.emplace_back(n + it.row(), k, it.value());
  }
  for (int i = 0; i < rows; ++i) kt.emplace_back(n + i, n + i, -1.0 / rho_vec(i));
  SparseMatrix kkt(n + rows, n + rows);
  kkt.setFromTriplets(kt.begin(), kt.end());
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(kkt);

  ConeSolution sol;
  auto finish = [&](SolveStatus st, const std::string& msg) {
    sol.status = st;
    sol.message = msg;
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return sol;
  };
  if (ldlt.info() != Eigen::Success) return finish(SolveStatus::kNumericalFailure, "factorization failed");

  auto project = [&](const Vector& v) {
    Vector out(rows);
    out.head(p).setZero();
    out.tail(m) = project_onto_cone(v.tail(m), prob.n_nonneg, prob.soc_dims);
    return out;
  };

  Vector x = Vector::Zero(n);
  Vector s = Vector::Zero(rows);
  Vector y = Vector::Zero(rows);
  const double alpha = params_.alpha;
  const int max_iter = std::max(params_.max_iter, opts.max_iter);
  Vector rhs(n + rows);
  for (int iter = 1; iter <= max_iter; ++iter) {
    rhs.head(n) = sigma * x - prob.c;
    rhs.tail(rows) = q - s + y.cwiseQuotient(rho_vec);
    const Vector sol_kkt = ldlt.solve(rhs);
    const Vector xt = sol_kkt.head(n);
    const Vector nu = sol_kkt.tail(rows);
    const Vector st = s - (nu + y).cwiseQuotient(rho_vec);
    const Vector x_new = alpha * xt + (1 - alpha) * x;
    const Vector s_relax = alpha * st + (1 - alpha) * s;
    const Vector s_new = project(s_relax + y.cwiseQuotient(rho_vec));
    const Vector y_new = y + rho_vec.cwiseProduct(s_relax - s_new);
    const Vector dy = y_new - y;
    x = x_new;
    s = s_new;
    y = y_new;
    if (iter % 25 != 0) continue;
    const Vector mx = mm * x;
    const Vector mty = mm.transpose() * y;
    const double rp = (mx + s - q).lpNorm<Eigen::Infinity>();
    const double rd = (prob.c - mty).lpNorm<Eigen::Infinity>();
    const double ep = params_.eps_abs +
                      params_.eps_rel * std::max({mx.lpNorm<Eigen::Infinity>(),
                                                  s.lpNorm<Eigen::Infinity>(),
                                                  q.lpNorm<Eigen::Infinity>()});
    const double ed = params_.eps_abs +
                      params_.eps_rel * std::max(mty.lpNorm<Eigen::Infinity>(),
                                                 prob.c.lpNorm<Eigen::Infinity>());
    sol.iterations = iter;
    sol.primal_residual = rp;
    sol.dual_residual = rd;
    if (opts.verbose && iter % 1000 == 0) {
      std::fprintf(stderr, "admm %6d obj %+.9e rp %.2e rd %.2e\n", iter, prob.c.dot(x), rp, rd);
    }
    if (rp <= ep && rd <= ed) {
      sol.x = x;
      sol.y = -y.head(p);
      sol.z = -y.tail(m);
      sol.s = s.tail(m);
      sol.objective = prob.c.dot(x) + prob.c0;
      sol.gap = std::abs(prob.c.dot(x) - q.dot(y));
      return finish(SolveStatus::kOptimal, "converged");
    }
    const double ndy = dy.lpNorm<Eigen::Infinity>();
    if (ndy > 1e-12) {
      const double qdy = q.dot(dy);
      if ((mm.transpose() * dy).lpNorm<Eigen::Infinity>() <= 1e-9 * ndy && qdy > 1e-9 * ndy) {
        return finish(SolveStatus::kInfeasible, "primal infeasibility certificate");
      }
    }
  }
  sol.x = x;
  sol.y = -y.head(p);
  sol.z = -y.tail(m);
  sol.s = s.tail(m);
  sol.objective = prob.c.dot(x) + prob.c0;
  return finish(SolveStatus::kMaxIter, "iteration limit reached");
}

}  // namespace itoagc
