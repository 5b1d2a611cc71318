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

#include "itoagc/conic.hpp"

#include <algorithm>
#include <map>

#include <Eigen/Eigenvalues>

namespace itoagc {

AffineExpr& AffineExpr::add(int var, double coef) {
  if (coef != 0.0) terms.push_back({var, coef});
  return *this;
}

AffineExpr& AffineExpr::add(const AffineExpr& other, double scale) {
  for (const auto& t : other.terms) add(t.var, scale * t.coef);
  constant += scale * other.constant;
  return *this;
}

double AffineExpr::eval(const Vector& x) const {
  double v = constant;
  for (const auto& t : terms) v += t.coef * x(t.var);
  return v;
}

void AffineExpr::compress() {
  std::sort(terms.begin(), terms.end(),
            [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> merged;
  for (const auto& t : terms) {
    if (!merged.empty() && merged.back().var == t.var) {
      merged.back().coef += t.coef;
    } else {
      merged.push_back(t);
    }
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const Term& t) { return t.coef == 0.0; }),
               merged.end());
  terms = std::move(merged);
}

AffineExpr var_expr(int var, double coef) {
  AffineExpr e;
  e.add(var, coef);
  return e;
}

std::string_view to_string(VarRole role) {
  switch (role) {
    case VarRole::kState: return "state";
    case VarRole::kSensitivity: return "sensitivity";
    case VarRole::kEpigraph: return "epigraph";
    case VarRole::kObjective: return "objective";
    case VarRole::kPolicy: return "policy";
    case VarRole::kAuxiliary: return "auxiliary";
  }
  return "?";
}

std::string_view to_string(RowRole role) {
  switch (role) {
    case RowRole::kDynamics: return "dynamics";
    case RowRole::kSensitivity: return "sensitivity";
    case RowRole::kLimit: return "limit";
    case RowRole::kEpigraph: return "epigraph";
    case RowRole::kObjective: return "objective";
    case RowRole::kAuxiliary: return "auxiliary";
  }
  return "?";
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kUnbounded: return "unbounded";
    case SolveStatus::kMaxIter: return "max_iter";
    case SolveStatus::kNumericalFailure: return "numerical_failure";
  }
  return "?";
}

double ConstraintViolation::worst() const {
  return std::max({equality, inequality, soc, epigraph});
}

int ConicProgram::add_block(const std::string& name, int size, VarRole role) {
  require(size >= 0, ErrorCode::kInvalidParameter, "negative block size");
  require(!has_block(name), ErrorCode::kInvalidParameter, "duplicate block " + name);
  blocks_.push_back({name, n_vars_, size, role});
  n_vars_ += size;
  return blocks_.back().offset;
}

const VarBlock& ConicProgram::block(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw Error(ErrorCode::kInvalidParameter, "no variable block named " + name);
}

bool ConicProgram::has_block(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [&](const VarBlock& b) { return b.name == name; });
}

namespace {

void check_vars(const AffineExpr& e, int n) {
  for (const auto& t : e.terms) {
    require(t.var >= 0 && t.var < n, ErrorCode::kDimensionMismatch,
            "expression references variable " + std::to_string(t.var) + " of " +
                std::to_string(n));
  }
}

}  // namespace

void ConicProgram::add_eq(AffineExpr expr, RowRole role) {
  expr.compress();
  check_vars(expr, n_vars_);
  eqs_.push_back({std::move(expr), role});
}

void ConicProgram::add_le(AffineExpr expr, RowRole role) {
  expr.compress();
  check_vars(expr, n_vars_);
  les_.push_back({std::move(expr), role});
}

void ConicProgram::add_soc(std::vector<AffineExpr> v, AffineExpr t, RowRole role) {
  for (auto& e : v) {
    e.compress();
    check_vars(e, n_vars_);
  }
  t.compress();
  check_vars(t, n_vars_);
  socs_.push_back({std::move(v), std::move(t), role});
}

void ConicProgram::add_quad_epigraph(std::vector<AffineExpr> v, AffineExpr t, RowRole role,
                                     double scale) {
  require(scale > 0 && std::isfinite(scale), ErrorCode::kInvalidParameter,
          "epigraph scale must be positive");
  for (auto& e : v) {
    e.compress();
    check_vars(e, n_vars_);
  }
  t.compress();
  check_vars(t, n_vars_);
  epis_.push_back({std::move(v), std::move(t), role, scale});
}

void ConicProgram::set_objective(AffineExpr obj) {
  obj.compress();
  check_vars(obj, n_vars_);
  objective_ = std::move(obj);
}

void ConicProgram::fix(int var, double value, RowRole role) {
  AffineExpr e(-value);
  e.add(var, 1.0);
  add_eq(std::move(e), role);
}

ConstraintViolation ConicProgram::check(const Vector& x) const {
  require(x.size() == n_vars_, ErrorCode::kDimensionMismatch, "point has wrong dimension");
  ConstraintViolation v;
  for (const auto& r : eqs_) v.equality = std::max(v.equality, std::abs(r.expr.eval(x)));
  for (const auto& r : les_) v.inequality = std::max(v.inequality, r.expr.eval(x));
  for (const auto& r : socs_) {
    double sq = 0.0;
    for (const auto& e : r.v) sq += std::pow(e.eval(x), 2);
    v.soc = std::max(v.soc, std::sqrt(sq) - r.t.eval(x));
  }
  for (const auto& r : epis_) {
    double sq = 0.0;
    for (const auto& e : r.v) sq += std::pow(e.eval(x), 2);
    v.epigraph = std::max(v.epigraph, sq - r.t.eval(x));
  }
  return v;
}

double ConicProgram::min_gram_eigenvalue() const {
  double worst = kInf;
  for (const auto& r : epis_) {
    std::map<int, int> col;
    for (const auto& e : r.v) {
      for (const auto& t : e.terms) col.emplace(t.var, static_cast<int>(col.size()));
    }
    if (col.empty()) continue;
    Matrix v = Matrix::Zero(static_cast<Eigen::Index>(r.v.size()),
                            static_cast<Eigen::Index>(col.size()));
    for (std::size_t i = 0; i < r.v.size(); ++i) {
      for (const auto& t : r.v[i].terms) v(static_cast<Eigen::Index>(i), col[t.var]) += t.coef;
    }
    const Matrix gram = v.transpose() * v;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues().minCoeff());
  }
  return std::isfinite(worst) ? worst : 0.0;
}

StandardForm ConicProgram::lower() const {
  StandardForm sf;
  const int n = n_vars_;
  sf.c = Vector::Zero(n);
  for (const auto& t : objective_.terms) sf.c(t.var) += t.coef;
  sf.c0 = objective_.constant;

  std::vector<Triplet> a_trip;
  sf.b.resize(static_cast<Eigen::Index>(eqs_.size()));
  for (std::size_t i = 0; i < eqs_.size(); ++i) {
    for (const auto& t : eqs_[i].expr.terms) {
      a_trip.emplace_back(static_cast<int>(i), t.var, t.coef);
    }
    sf.b(static_cast<Eigen::Index>(i)) = -eqs_[i].expr.constant;
  }
  sf.A.resize(static_cast<int>(eqs_.size()), n);
  sf.A.setFromTriplets(a_trip.begin(), a_trip.end());

  std::vector<Triplet> g_trip;
  std::vector<double> h;
  auto push_row = [&](const AffineExpr& e, double scale, double offset) {
    const int row = static_cast<int>(h.size());
    for (const auto& t : e.terms) g_trip.emplace_back(row, t.var, -scale * t.coef);
    h.push_back(scale * e.constant + offset);
  };
  for (const auto& r : les_) {
    AffineExpr neg;
    neg.add(r.expr, -1.0);
    push_row(neg, 1.0, 0.0);
  }
  sf.n_nonneg = static_cast<int>(les_.size());
  for (const auto& r : socs_) {
    push_row(r.t, 1.0, 0.0);
    for (const auto& e : r.v) push_row(e, 1.0, 0.0);
    sf.soc_dims.push_back(1 + static_cast<int>(r.v.size()));
  }
  for (const auto& r : epis_) {
    const double rho = r.scale;
    push_row(r.t, 0.5 / rho, 0.5 * rho);
    for (const auto& e : r.v) push_row(e, 1.0, 0.0);
    push_row(r.t, 0.5 / rho, -0.5 * rho);
    sf.soc_dims.push_back(2 + static_cast<int>(r.v.size()));
  }
  sf.h = Eigen::Map<const Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
  sf.G.resize(static_cast<int>(h.size()), n);
  sf.G.setFromTriplets(g_trip.begin(), g_trip.end());
  return sf;
}

namespace {

nlohmann::json triplets(const SparseMatrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out.push_back({it.row(), it.col(), it.value()});
    }
  }
  return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json ConicProgram::to_json() const {
  const StandardForm sf = lower();
  nlohmann::json doc;
  doc["format"] = "itoagc-conic-dump-1";
  doc["kind"] = kind;
  doc["n_vars"] = n_vars_;
  doc["n_steps"] = n_steps;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : blocks_) {
    blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size},
                      {"role", std::string(to_string(b.role))}});
  }
  doc["blocks"] = blocks;
  std::vector<std::string> eq_roles;
  for (const auto& r : eqs_) eq_roles.emplace_back(to_string(r.role));
  std::vector<std::string> cone_roles;
  for (const auto& r : les_) cone_roles.emplace_back(to_string(r.role));
  for (const auto& r : socs_) cone_roles.emplace_back(to_string(r.role));
  for (const auto& r : epis_) cone_roles.emplace_back(to_string(r.role));
  doc["c"] = to_std(sf.c);
  doc["c0"] = sf.c0;
  doc["A"] = {{"rows", sf.A.rows()}, {"cols", sf.A.cols()}, {"triplets", triplets(sf.A)}};
  doc["b"] = to_std(sf.b);
  doc["G"] = {{"rows", sf.G.rows()}, {"cols", sf.G.cols()}, {"triplets", triplets(sf.G)}};
  doc["h"] = to_std(sf.h);
  doc["cones"] = {{"nonneg", sf.n_nonneg}, {"soc", sf.soc_dims}};
  doc["equality_roles"] = eq_roles;
  doc["cone_roles"] = cone_roles;
  doc["epigraphs_lowered_as"] = "rotated: (t/rho+rho)/2 >= ||(v, (t/rho-rho)/2)||";
  return doc;
}

Vector project_onto_cone(const Vector& v, int n_nonneg, const std::vector<int>& soc_dims) {
  Vector out = v;
  for (int i = 0; i < n_nonneg; ++i) out(i) = std::max(out(i), 0.0);
  int off = n_nonneg;
  for (int d : soc_dims) {
    const double t = v(off);
    const double nrm = v.segment(off + 1, d - 1).norm();
    if (nrm <= t) {
      // inside
    } else if (nrm <= -t) {
      out.segment(off, d).setZero();
    } else {
      const double a = 0.5 * (t + nrm);
      out(off) = a;
      out.segment(off + 1, d - 1) = a / nrm * v.segment(off + 1, d - 1);
    }
    off += d;
  }
  return out;
}

std::unique_ptr<ConicBackend> make_backend(std::string_view name) {
  if (name == "ipm") return std::make_unique<InteriorPointBackend>();
  if (name == "admm") return std::make_unique<AdmmBackend>();
  throw Error(ErrorCode::kInvalidParameter, "unknown solver backend " + std::string(name));
}

}  // namespace itoagc
