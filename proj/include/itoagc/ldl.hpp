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

#include <vector>

#include "itoagc/conic.hpp"

namespace itoagc {

/// LDL^T factorization of a symmetric quasi-definite matrix with known pivot
/// signs. Pivots whose sign is wrong or whose magnitude falls below `eps` are
/// replaced by sign * delta (dynamic regularization), so the factorization
/// never breaks down.
class QuasiDefiniteLdl {
 public:
  struct Params {
    double eps = 1e-13;
    double delta = 2e-7;
  };

  QuasiDefiniteLdl() = default;
  explicit QuasiDefiniteLdl(Params params) : params_(params) {}

  /// Fill-reducing ordering and symbolic factorization of the pattern of
  /// `lower` (lower triangle, diagonal present).
  void analyze(const SparseMatrix& lower);
  /// Numeric factorization; `lower` must share the analyzed pattern and
  /// `signs` holds +1 / -1 per row of the unpermuted matrix.
  void factorize(const SparseMatrix& lower, const std::vector<int>& signs);
  Vector solve(const Vector& rhs) const;

  bool analyzed() const { return analyzed_; }
  int n() const { return n_; }
  /// Stored entries of the strictly lower factor.
  int factor_nonzeros() const { return lp_.empty() ? 0 : lp_.back(); }
  /// Number of pivots replaced in the last factorization.
  int regularized_pivots() const { return n_regularized_; }
  /// Inertia of D: count of positive pivots.
  int positive_pivots() const;

 private:
  Params params_;
  bool analyzed_ = false;
  int n_ = 0;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_;
  SparseMatrix upper_;  // permuted upper triangle
  std::vector<int> etree_;
  std::vector<int> lnz_;
  std::vector<int> lp_;
  std::vector<int> li_;
  std::vector<double> lx_;
  std::vector<double> d_;
  std::vector<double> dinv_;
  int n_regularized_ = 0;
};

}  // namespace itoagc
