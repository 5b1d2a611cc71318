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

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCore>

#include "json.hpp"

#include "itoagc/common.hpp"

namespace itoagc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

struct Term {
  int var = 0;
  double coef = 0.0;
};

/// sum coef * x[var] + constant.
struct AffineExpr {
  std::vector<Term> terms;
  double constant = 0.0;

  AffineExpr() = default;
  explicit AffineExpr(double c) : constant(c) {}

  AffineExpr& add(int var, double coef);
  AffineExpr& add(const AffineExpr& other, double scale = 1.0);
  double eval(const Vector& x) const;
  /// Merges duplicate variables and drops exact zeros.
  void compress();
};

AffineExpr var_expr(int var, double coef = 1.0);

/// Which problem-size line a variable or constraint is accounted under.
enum class VarRole { kState, kSensitivity, kEpigraph, kObjective, kPolicy, kAuxiliary };
enum class RowRole { kDynamics, kSensitivity, kLimit, kEpigraph, kObjective, kAuxiliary };

std::string_view to_string(VarRole role);
std::string_view to_string(RowRole role);

struct VarBlock {
  std::string name;
  int offset = 0;
  int size = 0;
  VarRole role = VarRole::kAuxiliary;
};

struct EqConstraint {
  AffineExpr expr;  // expr == 0
  RowRole role;
};

struct LeConstraint {
  AffineExpr expr;  // expr <= 0
  RowRole role;
};

struct SocConstraint {
  std::vector<AffineExpr> v;  // ||v|| <= t
  AffineExpr t;
  RowRole role;
};

/// sum_i v_i^2 <= t. `scale` is the expected magnitude of t and only
/// conditions the rotated-cone lowering.
struct QuadEpigraph {
  std::vector<AffineExpr> v;
  AffineExpr t;
  RowRole role;
  double scale = 1.0;
};

/// min c^T x + c0 s.t. A x = b, h - G x in K, K = R+^l x Q^{q1} x ...
struct StandardForm {
  SparseMatrix A;
  Vector b;
  SparseMatrix G;
  Vector h;
  Vector c;
  double c0 = 0.0;
  int n_nonneg = 0;
  std::vector<int> soc_dims;

  int n() const { return static_cast<int>(c.size()); }
  int p() const { return static_cast<int>(b.size()); }
  int m() const { return static_cast<int>(h.size()); }
};

struct ConstraintViolation {
  double equality = 0.0;
  double inequality = 0.0;
  double soc = 0.0;
  double epigraph = 0.0;
  double worst() const;
};

/// Where the affine policy lives inside the decision vector.
struct PolicyLayout {
  int n_steps = 0;
  int nu = 0;
  int nz = 0;
  int u0_offset = -1;               // row-major n_steps x nu
  std::vector<int> f1_offsets;      // each row-major nz x nu
};

/// Convex program: linear equalities and inequalities, second-order cones,
/// quadratic epigraphs and a linear objective.
class ConicProgram {
 public:
  std::string kind;  // "scp", "dc", "mpc", "sbsp" or free text
  int n_steps = 0;
  int nx = 0;
  int nu = 0;
  int nz = 0;
  int nc = 0;
  int n_scenarios = 0;
  PolicyLayout policy;

  int add_block(const std::string& name, int size, VarRole role);
  const VarBlock& block(const std::string& name) const;
  bool has_block(const std::string& name) const;
  const std::vector<VarBlock>& blocks() const { return blocks_; }
  int n_vars() const { return n_vars_; }

  void add_eq(AffineExpr expr, RowRole role);
  void add_le(AffineExpr expr, RowRole role);
  void add_soc(std::vector<AffineExpr> v, AffineExpr t, RowRole role);
  void add_quad_epigraph(std::vector<AffineExpr> v, AffineExpr t, RowRole role,
                         double scale = 1.0);
  void set_objective(AffineExpr obj);
  /// Fixes x[var] = value (policy pinning, e.g. zero gain).
  void fix(int var, double value, RowRole role = RowRole::kAuxiliary);

  const std::vector<EqConstraint>& equalities() const { return eqs_; }
  const std::vector<LeConstraint>& inequalities() const { return les_; }
  const std::vector<SocConstraint>& socs() const { return socs_; }
  const std::vector<QuadEpigraph>& epigraphs() const { return epis_; }
  const AffineExpr& objective() const { return objective_; }

  double objective_value(const Vector& x) const { return objective_.eval(x); }
  ConstraintViolation check(const Vector& x) const;
  /// Minimum eigenvalue over the Gram matrices of all quadratic epigraphs.
  double min_gram_eigenvalue() const;

  StandardForm lower() const;
  /// Problem dump: variable blocks and triplet-form sparse data.
  nlohmann::json to_json() const;

 private:
  std::vector<VarBlock> blocks_;
  int n_vars_ = 0;
  std::vector<EqConstraint> eqs_;
  std::vector<LeConstraint> les_;
  std::vector<SocConstraint> socs_;
  std::vector<QuadEpigraph> epis_;
  AffineExpr objective_;
};

enum class SolveStatus { kOptimal, kInfeasible, kUnbounded, kMaxIter, kNumericalFailure };
std::string_view to_string(SolveStatus status);

struct SolverOptions {
  int max_iter = 100;
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  bool verbose = false;
};

struct ConeSolution {
  SolveStatus status = SolveStatus::kNumericalFailure;
  Vector x;
  Vector y;
  Vector z;
  Vector s;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double seconds = 0.0;
  std::string message;
};

/// Any solver for StandardForm programs.
class ConicBackend {
 public:
  virtual ~ConicBackend() = default;
  virtual std::string name() const = 0;
  virtual ConeSolution solve(const StandardForm& prob, const SolverOptions& opts) = 0;
};

/// Homogeneous self-dual primal-dual interior point method with
/// Nesterov-Todd scaling and Mehrotra correction. Reuses the symbolic
/// factorization when consecutive problems share a sparsity pattern.
class InteriorPointBackend : public ConicBackend {
 public:
  InteriorPointBackend();
  ~InteriorPointBackend() override;
  std::string name() const override { return "ipm"; }
  ConeSolution solve(const StandardForm& prob, const SolverOptions& opts) override;

 private:
  struct Workspace;
  std::unique_ptr<Workspace> ws_;
};

/// Operator-splitting reference solver (slow, first-order accuracy).
class AdmmBackend : public ConicBackend {
 public:
  struct Params {
    int max_iter = 200000;
    double rho = 1.0;
    double sigma = 1e-6;
    double alpha = 1.6;
    double eps_abs = 1e-7;
    double eps_rel = 1e-7;
  };
  AdmmBackend() = default;
  explicit AdmmBackend(Params params) : params_(params) {}
  std::string name() const override { return "admm"; }
  ConeSolution solve(const StandardForm& prob, const SolverOptions& opts) override;

 private:
  Params params_;
};

std::unique_ptr<ConicBackend> make_backend(std::string_view name);

/// Projection of v onto the product cone described by (n_nonneg, soc_dims).
Vector project_onto_cone(const Vector& v, int n_nonneg, const std::vector<int>& soc_dims);

}  // namespace itoagc
