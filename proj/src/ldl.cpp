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


#include "itoagc/ldl.hpp"

#include <algorithm>

#include <Eigen/OrderingMethods>

namespace itoagc {

void QuasiDefiniteLdl::analyze(const SparseMatrix& lower) {
  require(lower.rows() == lower.cols(), ErrorCode::kDimensionMismatch,
          "factorization needs a square matrix");
  n_ = static_cast<int>(lower.rows());
  SparseMatrix full;
  full = lower.selfadjointView<Eigen::Lower>();
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
  Eigen::AMDOrdering<int> amd;
  amd(full, pinv);
  perm_ = pinv.inverse();
  upper_.resize(n_, n_);
  upper_.selfadjointView<Eigen::Upper>() = lower.selfadjointView<Eigen::Lower>().twistedBy(perm_);
  upper_.makeCompressed();

  // Elimination tree and column counts of L.
  etree_.assign(n_, -1);
  lnz_.assign(n_, 0);
  std::vector<int> work(n_, -1);
  const int* ap = upper_.outerIndexPtr();
  const int* ai = upper_.innerIndexPtr();
  for (int j = 0; j < n_; ++j) {
    work[j] = j;
    for (int p = ap[j]; p < ap[j + 1]; ++p) {
      int i = ai[p];
      while (work[i] != j) {
        if (etree_[i] == -1) etree_[i] = j;
        ++lnz_[i];
        work[i] = j;
        i = etree_[i];
      }
    }
  }
  lp_.assign(n_ + 1, 0);
  for (int i = 0; i < n_; ++i) lp_[i + 1] = lp_[i] + lnz_[i];
  li_.assign(lp_[n_], 0);
  lx_.assign(lp_[n_], 0.0);
  d_.assign(n_, 0.0);
  dinv_.assign(n_, 0.0);
  analyzed_ = true;
}

void QuasiDefiniteLdl::factorize(const SparseMatrix& lower, const std::vector<int>& signs) {
  require(analyzed_ && lower.rows() == n_, ErrorCode::kDimensionMismatch,
          "factorization pattern was not analyzed");
  require(static_cast<int>(signs.size()) == n_, ErrorCode::kDimensionMismatch,
          "pivot sign vector has the wrong length");
  upper_.selfadjointView<Eigen::Upper>() = lower.selfadjointView<Eigen::Lower>().twistedBy(perm_);
  std::vector<int> sign(n_);
  for (int i = 0; i < n_; ++i) sign[perm_.indices()(i)] = signs[i];

  const int* ap = upper_.outerIndexPtr();
  const int* ai = upper_.innerIndexPtr();
  const double* ax = upper_.valuePtr();
  std::vector<char> marked(n_, 0);
  std::vector<int> y_idx(n_);
  std::vector<int> buffer(n_);
  std::vector<int> next(n_);
  std::vector<double> y(n_, 0.0);
  for (int i = 0; i < n_; ++i) next[i] = lp_[i];
  n_regularized_ = 0;

  for (int k = 0; k < n_; ++k) {
    d_[k] = 0.0;
    int n_y = 0;
    for (int p = ap[k]; p < ap[k + 1]; ++p) {
      const int b = ai[p];
      if (b == k) {
        d_[k] += ax[p];
        continue;
      }
      y[b] = ax[p];
      if (marked[b]) continue;
      // Walk the elimination tree from b up to k.
      marked[b] = 1;
      buffer[0] = b;
      int n_buf = 1;
      for (int t = etree_[b]; t != -1 && t < k && !marked[t]; t = etree_[t]) {
        marked[t] = 1;
        buffer[n_buf++] = t;
      }
      while (n_buf > 0) y_idx[n_y++] = buffer[--n_buf];
    }
    for (int i = n_y - 1; i >= 0; --i) {
      const int c = y_idx[i];
      const int end = next[c];
      const double yc = y[c];
      for (int j = lp_[c]; j < end; ++j) y[li_[j]] -= lx_[j] * yc;
      li_[end] = k;
      lx_[end] = yc * dinv_[c];
      d_[k] -= yc * lx_[end];
      ++next[c];
      y[c] = 0.0;
      marked[c] = 0;
    }
    if (!(sign[k] * d_[k] > params_.eps)) {
      d_[k] = sign[k] * params_.delta;
      ++n_regularized_;
    }
    dinv_[k] = 1.0 / d_[k];
  }
}

Vector QuasiDefiniteLdl::solve(const Vector& rhs) const {
  require(rhs.size() == n_, ErrorCode::kDimensionMismatch, "right-hand side has wrong size");
  Vector x = perm_ * rhs;
  for (int i = 0; i < n_; ++i) {
    for (int j = lp_[i]; j < lp_[i + 1]; ++j) x(li_[j]) -= lx_[j] * x(i);
  }
  for (int i = 0; i < n_; ++i) x(i) *= dinv_[i];
  for (int i = n_ - 1; i >= 0; --i) {
    for (int j = lp_[i]; j < lp_[i + 1]; ++j) x(i) -= lx_[j] * x(li_[j]);
  }
  return perm_.inverse() * x;
}

int QuasiDefiniteLdl::positive_pivots() const {
  return static_cast<int>(std::count_if(d_.begin(), d_.end(), [](double v) { return v > 0; }));
}

}  // namespace itoagc
