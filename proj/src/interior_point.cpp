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
#include <cstdint>
#include <cstdio>
#include <vector>


#include "itoagc/conic.hpp"
#include "itoagc/ldl.hpp"

namespace itoagc {

namespace {

constexpr double kStaticReg = 1e-8;
constexpr double kConeReg = 1e-10;
constexpr int kRefineSteps = 10;
constexpr double kReducedFeasTol = 1e-6;
constexpr double kReducedGapTol = 1e-6;
constexpr int kRuizPasses = 15;
constexpr double kStepFraction = 0.99;

struct ConeLayout {
  int l = 0;
  std::vector<int> dims;
  std::vector<int> offsets;
  int m = 0;
  int degree() const { return l + static_cast<int>(dims.size()); }
};

ConeLayout make_layout(const StandardForm& p) {
  ConeLayout c;
  c.l = p.n_nonneg;
  c.dims = p.soc_dims;
  int off = c.l;
  for (int d : c.dims) {
    c.offsets.push_back(off);
    off += d;
  }
  c.m = off;
  return c;
}

// Nesterov-Todd scaling point data, one entry per cone.
struct Scaling {
  Vector w_lin;
  std::vector<double> eta;
  std::vector<Vector> wbar;
};

double soc_residual(const Vector& u, int off, int d) {
  const double t = u(off);
  const double r = u.segment(off + 1, d - 1).norm();
  return (t - r) * (t + r);
}

// Smallest "eigenvalue" of u with respect to the cone.
double min_cone_eig(const ConeLayout& c, const Vector& u) {
  double worst = kInf;
  for (int i = 0; i < c.l; ++i) worst = std::min(worst, u(i));
  for (std::size_t k = 0; k < c.dims.size(); ++k) {
    const int off = c.offsets[k];
    worst = std::min(worst, u(off) - u.segment(off + 1, c.dims[k] - 1).norm());
  }
  return worst;
}

void add_identity(const ConeLayout& c, Vector& u, double a) {
  for (int i = 0; i < c.l; ++i) u(i) += a;
  for (int off : c.offsets) u(off) += a;
}

double max_step(const ConeLayout& c, const Vector& u, const Vector& du) {
  double alpha = kInf;
  for (int i = 0; i < c.l; ++i) {
    if (du(i) < 0) alpha = std::min(alpha, -u(i) / du(i));
  }
  for (std::size_t k = 0; k < c.dims.size(); ++k) {
    const int off = c.offsets[k];
    const int d = c.dims[k];
    const double u0 = u(off);
    const double d0 = du(off);
    const auto u1 = u.segment(off + 1, d - 1);
    const auto d1 = du.segment(off + 1, d - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double b = u0 * d0 - u1.dot(d1);
    const double cc = std::max(soc_residual(u, off, d), 0.0);
    // Roots of a t^2 + 2 b t + cc = 0; keep the smallest positive one.
    double root = kInf;
    if (std::abs(a) < 1e-300) {
      if (b < 0) root = -cc / (2 * b);
    } else {
      const double disc = b * b - a * cc;
      if (disc >= 0) {
        const double sq = std::sqrt(disc);
        const double q = -(b + (b >= 0 ? sq : -sq));
        const double r1 = q / a;
        const double r2 = q != 0.0 ? cc / q : kInf;
        if (r1 > 0) root = std::min(root, r1);
        if (r2 > 0) root = std::min(root, r2);
      }
    }
    if (d0 < 0) root = std::min(root, -u0 / d0);
    alpha = std::min(alpha, root);
  }
  return alpha;
}

Scaling compute_scaling(const ConeLayout& c, const Vector& s, const Vector& z, Vector& lambda) {
  Scaling w;
  w.w_lin.resize(c.l);
  lambda.resize(c.m);
  for (int i = 0; i < c.l; ++i) {
    w.w_lin(i) = std::sqrt(s(i) / z(i));
    lambda(i) = std::sqrt(s(i) * z(i));
  }
  for (std::size_t k = 0; k < c.dims.size(); ++k) {
    const int off = c.offsets[k];
    const int d = c.dims[k];
    const double sres = std::max(soc_residual(s, off, d), 1e-300);
    const double zres = std::max(soc_residual(z, off, d), 1e-300);
    const Vector sb = s.segment(off, d) / std::sqrt(sres);
    const Vector zb = z.segment(off, d) / std::sqrt(zres);
    const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
    Vector wb(d);
    wb(0) = (sb(0) + zb(0)) / (2 * gamma);
    wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2 * gamma);
    const double eta = std::pow(sres / zres, 0.25);
    w.eta.push_back(eta);
    w.wbar.push_back(wb);
    // lambda = W z
    const Vector zz = z.segment(off, d);
    const double dot1 = wb.tail(d - 1).dot(zz.tail(d - 1));
    lambda(off) = eta * (wb(0) * zz(0) + dot1);
    lambda.segment(off + 1, d - 1) =
        eta * (zz.tail(d - 1) + (dot1 / (1 + wb(0)) + zz(0)) * wb.tail(d - 1));
  }
  return w;
}

Vector apply_w(const ConeLayout& c, const Scaling& w, const Vector& v, bool inverse) {
  Vector out(c.m);
  for (int i = 0; i < c.l; ++i) out(i) = inverse ? v(i) / w.w_lin(i) : v(i) * w.w_lin(i);
  for (std::size_t k = 0; k < c.dims.size(); ++k) {
    const int off = c.offsets[k];
    const int d = c.dims[k];
    const Vector& wb = w.wbar[k];
    const double v0 = v(off);
    const auto v1 = v.segment(off + 1, d - 1);
    const double dot1 = wb.tail(d - 1).dot(v1);
    if (!inverse) {
      out(off) = w.eta[k] * (wb(0) * v0 + dot1);
      out.segment(off + 1, d - 1) =
          w.eta[k] * (v1 + (dot1 / (1 + wb(0)) + v0) * wb.tail(d - 1));
    } else {
      out(off) = (wb(0) * v0 - dot1) / w.eta[k];
      out.segment(off + 1, d - 1) =
          (v1 + (dot1 / (1 + wb(0)) - v0) * wb.tail(d - 1)) / w.eta[k];
    }
  }
  return out;
}

Vector jordan_product(const ConeLayout& c, const Vector& u, const Vector& v) {
  Vector out(c.m);
  for (int i = 0; i < c.l; ++i) out(i) = u(i) * v(i);
  for (std::size_t k = 0; k < c.dims.size(); ++k) {
    const int off = c.offsets[k];
    const int d = c.dims[k];
    out(off) = u.segment(off, d).dot(v.segment(off, d));
    out.segment(off + 1, d - 1) =
        u(off) * v.segment(off + 1, d - 1) + v(off) * u.segment(off + 1, d - 1);
  }
  return out;
}

// Solves lambda o v = xi for v.
Vector jordan_divide(const ConeLayout& c, const Vector& lambda, const Vector& xi) {
  Vector out(c.m);
  for (int i = 0; i < c.l; ++i) out(i) = xi(i) / lambda(i);
  for (std::size_t k = 0; k < c.dims.size(); ++k) {
    const int off = c.offsets[k];
    const int d = c.dims[k];
    const double l0 = lambda(off);
    const auto l1 = lambda.segment(off + 1, d - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double v0 = (l0 * xi(off) - l1.dot(xi.segment(off + 1, d - 1))) / det;
    out(off) = v0;
    out.segment(off + 1, d - 1) = (xi.segment(off + 1, d - 1) - v0 * l1) / l0;
  }
  return out;
}

std::uint64_t pattern_hash(const SparseMatrix& m, std::uint64_t h) {
  auto mix = [&](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  mix(static_cast<std::uint64_t>(m.rows()));
  mix(static_cast<std::uint64_t>(m.cols()));
  for (int k = 0; k <= m.outerSize(); ++k) mix(static_cast<std::uint64_t>(m.outerIndexPtr()[k]));
  for (int k = 0; k < m.nonZeros(); ++k) mix(static_cast<std::uint64_t>(m.innerIndexPtr()[k]));
  return h;
}

}  // namespace

struct InteriorPointBackend::Workspace {
  std::uint64_t signature = 0;
  bool analyzed = false;
  QuasiDefiniteLdl ldlt;
};

InteriorPointBackend::InteriorPointBackend() : ws_(std::make_unique<Workspace>()) {}
InteriorPointBackend::~InteriorPointBackend() = default;

namespace {

// Ruiz equilibration of [A; G] keeping cone blocks uniformly scaled.
struct Equilibration {
  Vector d;  // columns
  Vector e_a;
  Vector e_g;
};

Equilibration equilibrate(SparseMatrix& a, SparseMatrix& g, const ConeLayout& c) {
  const int n = static_cast<int>(a.cols());
  Equilibration eq{Vector::Ones(n), Vector::Ones(a.rows()), Vector::Ones(g.rows())};
  for (int pass = 0; pass < kRuizPasses; ++pass) {
    Vector col_max = Vector::Zero(n);
    Vector ra = Vector::Zero(a.rows());
    Vector rg = Vector::Zero(g.rows());
    for (int k = 0; k < n; ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
        col_max(k) = std::max(col_max(k), std::abs(it.value()));
        ra(it.row()) = std::max(ra(it.row()), std::abs(it.value()));
      }
      for (SparseMatrix::InnerIterator it(g, k); it; ++it) {
        col_max(k) = std::max(col_max(k), std::abs(it.value()));
        rg(it.row()) = std::max(rg(it.row()), std::abs(it.value()));
      }
    }
    for (std::size_t k = 0; k < c.dims.size(); ++k) {
      const double mx = rg.segment(c.offsets[k], c.dims[k]).maxCoeff();
      rg.segment(c.offsets[k], c.dims[k]).setConstant(mx);
    }
    auto inv_sqrt = [](double v) { return v > 0 ? 1.0 / std::sqrt(v) : 1.0; };
    const Vector dc = col_max.unaryExpr(inv_sqrt);
    const Vector da = ra.unaryExpr(inv_sqrt);
    const Vector dg = rg.unaryExpr(inv_sqrt);
    a = da.asDiagonal() * a * dc.asDiagonal();
    g = dg.asDiagonal() * g * dc.asDiagonal();
    eq.d = eq.d.cwiseProduct(dc);
    eq.e_a = eq.e_a.cwiseProduct(da);
    eq.e_g = eq.e_g.cwiseProduct(dg);
  }
  return eq;
}

class Kkt {
 public:
  Kkt(const SparseMatrix& a, const SparseMatrix& g, const ConeLayout& c)
      : a_(a), g_(g), c_(c), n_(static_cast<int>(a.cols())), p_(static_cast<int>(a.rows())) {
    std::vector<Triplet> trip;
    const int zo = n_ + p_;
    for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, kStaticReg);
    for (int k = 0; k < n_; ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) trip.emplace_back(n_ + it.row(), k, it.value());
      for (SparseMatrix::InnerIterator it(g, k); it; ++it) trip.emplace_back(zo + it.row(), k, it.value());
    }
    for (int i = 0; i < p_; ++i) trip.emplace_back(n_ + i, n_ + i, -kStaticReg);
    for (int i = 0; i < c.l; ++i) trip.emplace_back(zo + i, zo + i, -1.0);
    for (std::size_t k = 0; k < c.dims.size(); ++k) {
      const int off = zo + c.offsets[k];
      for (int j = 0; j < c.dims[k]; ++j) {
        for (int i = j; i < c.dims[k]; ++i) trip.emplace_back(off + i, off + j, i == j ? -1.0 : 0.0);
      }
    }
    const int dim = zo + c.m;
    k_.resize(dim, dim);
    k_.setFromTriplets(trip.begin(), trip.end());
    k_.makeCompressed();
    // Value slots of the cone blocks, column-major lower triangle per cone.
    for (int i = 0; i < c.l; ++i) slots_.push_back(&k_.coeffRef(zo + i, zo + i));
    for (std::size_t k = 0; k < c.dims.size(); ++k) {
      const int off = zo + c.offsets[k];
      for (int j = 0; j < c.dims[k]; ++j) {
        for (int i = j; i < c.dims[k]; ++i) slots_.push_back(&k_.coeffRef(off + i, off + j));
      }
    }
  }

  const SparseMatrix& matrix() const { return k_; }
  int dim() const { return static_cast<int>(k_.rows()); }

  // Cone block = -(W^2) - reg.
  void set_scaling(const Scaling* w) {
    w_ = w;
    std::size_t pos = 0;
    for (int i = 0; i < c_.l; ++i) {
      const double wi = w ? w->w_lin(i) : 1.0;
      *slots_[pos++] = -wi * wi - kConeReg;
    }
    for (std::size_t k = 0; k < c_.dims.size(); ++k) {
      const int d = c_.dims[k];
      for (int j = 0; j < d; ++j) {
        for (int i = j; i < d; ++i) {
          *slots_[pos++] = -w2(k, i, j) - (i == j ? kConeReg : 0.0);
        }
      }
    }
  }

  // Unregularized K times u.
  Vector multiply(const Vector& u) const {
    const auto x = u.head(n_);
    const auto y = u.segment(n_, p_);
    const auto z = u.tail(c_.m);
    Vector out(dim());
    out.head(n_) = a_.transpose() * y + g_.transpose() * z;
    out.segment(n_, p_) = a_ * x;
    Vector gz = g_ * x;
    for (int i = 0; i < c_.l; ++i) {
      const double wi = w_ ? w_->w_lin(i) : 1.0;
      gz(i) -= wi * wi * z(i);
    }
    for (std::size_t k = 0; k < c_.dims.size(); ++k) {
      const int off = c_.offsets[k];
      const int d = c_.dims[k];
      for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        for (int j = 0; j < d; ++j) acc += w2(k, i, j) * z(off + j);
        gz(off + i) -= acc;
      }
    }
    out.tail(c_.m) = gz;
    return out;
  }

 private:
  double w2(std::size_t k, int i, int j) const {
    if (!w_) return i == j ? 1.0 : 0.0;
    const Vector& wb = w_->wbar[k];
    const double e2 = w_->eta[k] * w_->eta[k];
    double v = 2.0 * wb(i) * wb(j);
    if (i == j) v += i == 0 ? -1.0 : 1.0;
    return e2 * v;
  }

  const SparseMatrix& a_;
  const SparseMatrix& g_;
  const ConeLayout& c_;
  int n_;
  int p_;
  SparseMatrix k_;
  std::vector<double*> slots_;
  const Scaling* w_ = nullptr;
};

}  // namespace

ConeSolution InteriorPointBackend::solve(const StandardForm& prob, const SolverOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  ConeSolution sol;
  const ConeLayout cones = make_layout(prob);
  require(cones.m == prob.m() && prob.G.rows() == prob.m() && prob.A.rows() == prob.p() &&
              prob.A.cols() == prob.n() && prob.G.cols() == prob.n(),
          ErrorCode::kDimensionMismatch, "standard form dimensions are inconsistent");
  const int n = prob.n();
  const int p = prob.p();
  const int m = prob.m();

  SparseMatrix a = prob.A;
  SparseMatrix g = prob.G;
  const Equilibration eq = equilibrate(a, g, cones);
  // Cost scaling keeps the objective gradient comparable to the constraint rows.
  const Vector c_eq = eq.d.cwiseProduct(prob.c);
  const double cscale =
      c_eq.size() > 0 && c_eq.lpNorm<Eigen::Infinity>() > 0
          ? std::clamp(1.0 / c_eq.lpNorm<Eigen::Infinity>(), 1e-4, 1e4)
          : 1.0;
  const Vector c = cscale * c_eq;
  const Vector b = eq.e_a.cwiseProduct(prob.b);
  const Vector h = eq.e_g.cwiseProduct(prob.h);

  Kkt kkt(a, g, cones);
  const std::uint64_t sig = pattern_hash(kkt.matrix(), 1469598103934665603ULL);
  if (!ws_->analyzed || ws_->signature != sig) {
    ws_->ldlt.analyze(kkt.matrix());
    ws_->signature = sig;
    ws_->analyzed = true;
  }
  auto& ldlt = ws_->ldlt;
  std::vector<int> signs(n + p + m, -1);
  std::fill(signs.begin(), signs.begin() + n, 1);
  auto factor = [&]() {
    ldlt.factorize(kkt.matrix(), signs);
    return true;
  };
  // Iterative refinement against the unregularized matrix; stops as soon as
  // the residual stops shrinking.
  auto kkt_solve = [&](const Vector& rhs) {
    Vector u = ldlt.solve(rhs);
    const double target = 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    Vector r = rhs - kkt.multiply(u);
    double err = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < kRefineSteps && err > target; ++it) {
      const Vector cand = u + ldlt.solve(r);
      const Vector rc = rhs - kkt.multiply(cand);
      const double ec = rc.lpNorm<Eigen::Infinity>();
      if (!(ec < err)) break;
      u = cand;
      r = rc;
      err = ec;
    }
    return u;
  };

  auto finish = [&](SolveStatus status, const std::string& msg) {
    sol.status = status;
    sol.message = msg;
    sol.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return sol;
  };

  // Initial point.
  kkt.set_scaling(nullptr);
  if (!factor()) return finish(SolveStatus::kNumericalFailure, "initial factorization failed");
  Vector rhs = Vector::Zero(n + p + m);
  rhs.segment(n, p) = b;
  rhs.tail(m) = h;
  Vector u = kkt_solve(rhs);
  Vector x = u.head(n);
  Vector s = -u.tail(m);
  rhs.setZero();
  rhs.head(n) = -c;
  u = kkt_solve(rhs);
  Vector y = u.segment(n, p);
  Vector z = u.tail(m);
  {
    // Shift into the interior unless already well inside.
    const double ap = -min_cone_eig(cones, s);
    if (ap >= -1e-8 * std::max(1.0, s.norm())) add_identity(cones, s, 1.0 + std::max(ap, 0.0));
    const double ad = -min_cone_eig(cones, z);
    if (ad >= -1e-8 * std::max(1.0, z.norm())) add_identity(cones, z, 1.0 + std::max(ad, 0.0));
  }
  double tau = 1.0;
  double kappa = 1.0;

  const double nb = std::max(1.0, prob.b.norm());
  const double nh = std::max(1.0, prob.h.norm());
  const double nc = std::max(1.0, prob.c.norm());
  const double degree = cones.degree() + 1.0;
  int slow_steps = 0;
  // Best iterate seen so far, used when the method stalls near the optimum.
  struct Iterate {
    Vector x, y, z, s;
    double tau = 1.0;
    double kappa = 1.0;
    double merit = kInf;
  } best;

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    sol.iterations = iter;
    const Vector r1 = a.transpose() * y + g.transpose() * z + c * tau;
    const Vector r2 = -(a * x) + b * tau;
    const Vector r3 = -(g * x) + h * tau - s;
    const double r4 = -c.dot(x) - b.dot(y) - h.dot(z) - kappa;

    // Unscaled diagnostics of the current iterate.
    const Vector ex = eq.d.cwiseProduct(x) / tau;
    const double pres = std::max((r2.cwiseQuotient(eq.e_a)).norm() / tau / nb,
                                 (r3.cwiseQuotient(eq.e_g)).norm() / tau / nh);
    const double dres = (r1.cwiseQuotient(eq.d)).norm() / tau / nc / cscale;
    const double pcost = c.dot(x) / tau / cscale;
    const double dcost = -(b.dot(y) + h.dot(z)) / tau / cscale;
    const double gap = s.dot(z) / (tau * tau) / cscale;
    const double relgap = gap / std::max(1e-300, std::min(std::abs(pcost), std::abs(dcost)));
    sol.primal_residual = pres;
    sol.dual_residual = dres;
    sol.gap = gap;
    if (opts.verbose) {
      std::fprintf(stderr, "ipm %3d pcost %+.9e dcost %+.9e gap %.2e pres %.2e dres %.2e k/t %.2e\n",
                   iter, pcost, dcost, gap, pres, dres, kappa / tau);
    }

    const double merit = std::max({pres, dres, gap / std::max(1.0, std::abs(pcost))});
    if (std::isfinite(merit) && merit < best.merit) best = {x, y, z, s, tau, kappa, merit};

    auto store = [&]() {
      sol.x = ex;
      sol.y = eq.e_a.cwiseProduct(y) / tau / cscale;
      sol.z = eq.e_g.cwiseProduct(z) / tau / cscale;
      sol.s = s.cwiseQuotient(eq.e_g) / tau;
      sol.objective = prob.c.dot(sol.x) + prob.c0;
    };

    if (pres < opts.feastol && dres < opts.feastol &&
        (gap < opts.abstol || relgap < opts.reltol)) {
      store();
      return finish(SolveStatus::kOptimal, "converged");
    }
    // Infeasibility certificates.
    const double btyz = b.dot(y) + h.dot(z);
    if (btyz < 0) {
      const double cert = (a.transpose() * y + g.transpose() * z).cwiseQuotient(eq.d).norm() / -btyz;
      if (cert < opts.feastol * 10 && kappa > tau) {
        sol.y = eq.e_a.cwiseProduct(y) / -btyz;
        sol.z = eq.e_g.cwiseProduct(z) / -btyz;
        return finish(SolveStatus::kInfeasible, "primal infeasibility certificate");
      }
    }
    const double ctx = c.dot(x);
    if (ctx < 0) {
      const double cert_a = (a * x).cwiseQuotient(eq.e_a).norm() / -ctx;
      const double cert_g = (g * x + s).cwiseQuotient(eq.e_g).norm() / -ctx;
      if (std::max(cert_a, cert_g) < opts.feastol * 10 && kappa > tau) {
        sol.x = eq.d.cwiseProduct(x) / -ctx;
        return finish(SolveStatus::kUnbounded, "dual infeasibility certificate");
      }
    }
    if (iter == opts.max_iter) break;

    Vector lambda;
    const Scaling w = compute_scaling(cones, s, z, lambda);
    kkt.set_scaling(&w);
    if (!factor()) {
      if (opts.verbose) std::fprintf(stderr, "ipm: factorization failed\n");
      break;
    }

    rhs.setZero();
    rhs.head(n) = -c;
    rhs.segment(n, p) = b;
    rhs.tail(m) = h;
    const Vector u1 = kkt_solve(rhs);
    const double denom_base = kappa / tau - c.dot(u1.head(n)) - b.dot(u1.segment(n, p)) -
                              h.dot(u1.tail(m));

    struct Direction {
      Vector dx, dy, dz, ds;
      double dtau = 0.0;
      double dkappa = 0.0;
    };
    auto direction = [&](double eta, const Vector& xi, double dk) {
      const Vector lxi = jordan_divide(cones, lambda, xi);
      Vector r(n + p + m);
      r.head(n) = -eta * r1;
      r.segment(n, p) = eta * r2;
      r.tail(m) = eta * r3 - apply_w(cones, w, lxi, false);
      const Vector u2 = kkt_solve(r);
      Direction d;
      d.dtau = (-eta * r4 + c.dot(u2.head(n)) + b.dot(u2.segment(n, p)) + h.dot(u2.tail(m)) +
                dk / tau) /
               denom_base;
      d.dx = u2.head(n) + d.dtau * u1.head(n);
      d.dy = u2.segment(n, p) + d.dtau * u1.segment(n, p);
      d.dz = u2.tail(m) + d.dtau * u1.tail(m);
      d.ds = apply_w(cones, w, lxi - apply_w(cones, w, d.dz, false), false);
      d.dkappa = (dk - kappa * d.dtau) / tau;
      return d;
    };
    auto step_to_boundary = [&](const Direction& d) {
      double alpha = std::min(max_step(cones, s, d.ds), max_step(cones, z, d.dz));
      if (d.dtau < 0) alpha = std::min(alpha, -tau / d.dtau);
      if (d.dkappa < 0) alpha = std::min(alpha, -kappa / d.dkappa);
      return alpha;
    };

    const double mu = (s.dot(z) + tau * kappa) / degree;
    const Vector ll = jordan_product(cones, lambda, lambda);
    const Direction aff = direction(1.0, -ll, -tau * kappa);
    const double alpha_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    Vector xi = -ll - jordan_product(cones, apply_w(cones, w, aff.ds, true),
                                     apply_w(cones, w, aff.dz, false));
    add_identity(cones, xi, sigma * mu);
    const double dk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    const Direction comb = direction(1.0 - sigma, xi, dk);
    const double alpha = std::min(1.0, kStepFraction * step_to_boundary(comb));
    if (!std::isfinite(alpha) || !comb.dx.allFinite()) {
      if (opts.verbose) std::fprintf(stderr, "ipm: non-finite step\n");
      break;
    }

    x += alpha * comb.dx;
    y += alpha * comb.dy;
    z += alpha * comb.dz;
    s += alpha * comb.ds;
    tau += alpha * comb.dtau;
    kappa += alpha * comb.dkappa;
    slow_steps = alpha < 1e-8 ? slow_steps + 1 : 0;
    if (slow_steps >= 3) break;
  }

  // Accept a reduced-accuracy point when it is close to optimal.
  if (best.merit < kInf) {
    x = best.x;
    y = best.y;
    z = best.z;
    s = best.s;
    tau = best.tau;
    kappa = best.kappa;
  }
  const Vector r1 = a.transpose() * y + g.transpose() * z + c * tau;
  const Vector r2 = -(a * x) + b * tau;
  const Vector r3 = -(g * x) + h * tau - s;
  const double pres = std::max((r2.cwiseQuotient(eq.e_a)).norm() / tau / nb,
                               (r3.cwiseQuotient(eq.e_g)).norm() / tau / nh);
  const double dres = (r1.cwiseQuotient(eq.d)).norm() / tau / nc / cscale;
  const double pcost = c.dot(x) / tau / cscale;
  const double gap = s.dot(z) / (tau * tau) / cscale;
  sol.x = eq.d.cwiseProduct(x) / tau;
  sol.y = eq.e_a.cwiseProduct(y) / tau / cscale;
  sol.z = eq.e_g.cwiseProduct(z) / tau / cscale;
  sol.s = s.cwiseQuotient(eq.e_g) / tau;
  sol.objective = prob.c.dot(sol.x) + prob.c0;
  if (pres < kReducedFeasTol && dres < kReducedFeasTol &&
      gap < kReducedGapTol * std::max(1.0, std::abs(pcost))) {
    return finish(SolveStatus::kOptimal, "converged to reduced accuracy");
  }
  if (sol.iterations >= opts.max_iter) {
    return finish(SolveStatus::kMaxIter, "iteration limit reached");
  }
  return finish(SolveStatus::kNumericalFailure, "step length collapsed or factorization failed");
}

}  // namespace itoagc
