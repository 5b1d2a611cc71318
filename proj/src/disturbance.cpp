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

#include "itoagc/disturbance.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace itoagc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParameter: return "invalid-parameter";
    case ErrorCode::kUnknownKind: return "unknown-kind";
    case ErrorCode::kNegativeDiffusion: return "negative-diffusion";
    case ErrorCode::kNonpositiveDensity: return "nonpositive-density";
    case ErrorCode::kOutOfSupport: return "out-of-support";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kValidationError: return "validation-error";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kSolverFailure: return "solver-failure";
    case ErrorCode::kIoError: return "io-error";
  }
  return "unknown";
}

std::string_view to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::kGaussian: return "gaussian";
    case ProcessKind::kBeta: return "beta";
    case ProcessKind::kGamma: return "gamma";
    case ProcessKind::kLaplace: return "laplace";
    case ProcessKind::kLaplaceCase45: return "laplace_case45";
    case ProcessKind::kCustom: return "custom";
  }
  return "custom";
}

ProcessKind process_kind_from_string(std::string_view name) {
  if (name == "gaussian" || name == "normal") return ProcessKind::kGaussian;
  if (name == "beta") return ProcessKind::kBeta;
  if (name == "gamma") return ProcessKind::kGamma;
  if (name == "laplace") return ProcessKind::kLaplace;
  if (name == "laplace_case45") return ProcessKind::kLaplaceCase45;
  if (name == "custom") return ProcessKind::kCustom;
  throw Error(ErrorCode::kUnknownKind,
              "unknown process kind '" + std::string(name) + "'");
}

ItoProcess1D::ItoProcess1D(ProcessKind kind, double a, double b,
                           ScalarFn drift, ScalarFn diffusion_sq,
                           ScalarFn drift_slope, Interval support)
    : kind_(kind),
      a_(a),
      b_(b),
      drift_(std::move(drift)),
      diffusion_sq_(std::move(diffusion_sq)),
      drift_slope_(std::move(drift_slope)),
      support_(support) {}

double ItoProcess1D::diffusion(double z) const {
  return std::sqrt(std::max(0.0, diffusion_sq_(z)));
}

ItoProcess1D ItoProcess1D::with_scaled_diffusion(double factor) const {
  ScalarFn base = diffusion_sq_;
  return ItoProcess1D(ProcessKind::kCustom, a_, b_, drift_,
                      [base, factor](double z) { return factor * base(z); },
                      drift_slope_, support_);
}

ItoProcess1D ItoProcess1D::deterministic() const {
  return ItoProcess1D(kind_, a_, b_, drift_, [](double) { return 0.0; },
                      drift_slope_, support_);
}

namespace {

ScalarFn reverting_drift(double mean) {
  return [mean](double z) { return -(z - mean); };
}

ScalarFn unit_negative_slope() {
  return [](double) { return -1.0; };
}

void require_positive(double v, const char* what, ProcessKind kind) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidParameter,
                std::string(to_string(kind)) + " requires " + what + " > 0");
  }
}

}  // namespace

ItoProcess1D make_standard_process(ProcessKind kind, double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorCode::kInvalidParameter, "process parameters must be finite");
  }
  switch (kind) {
    case ProcessKind::kGaussian: {
      // N(a, b) with b the variance.
      require_positive(b, "b", kind);
      return ItoProcess1D(kind, a, b, reverting_drift(a),
                          [b](double) { return 2.0 * b; },
                          unit_negative_slope(), Interval{});
    }
    case ProcessKind::kBeta: {
      require_positive(a, "a", kind);
      require_positive(b, "b", kind);
      const double mean = a / (a + b);
      const double scale = 2.0 / (a + b);
      return ItoProcess1D(
          kind, a, b, reverting_drift(mean),
          [scale](double z) { return std::max(0.0, scale * z * (1.0 - z)); },
          unit_negative_slope(), Interval{0.0, 1.0});
    }
    case ProcessKind::kGamma: {
      // Shape a, rate b.
      require_positive(a, "a", kind);
      require_positive(b, "b", kind);
      return ItoProcess1D(kind, a, b, reverting_drift(a / b),
                          [b](double z) { return std::max(0.0, 2.0 * z / b); },
                          unit_negative_slope(), Interval{0.0, kInf});
    }
    case ProcessKind::kLaplace: {
      require_positive(b, "b", kind);
      return ItoProcess1D(
          kind, a, b, reverting_drift(a),
          [a, b](double z) { return 2.0 * b * std::abs(z - a) + 2.0 * b * b; },
          unit_negative_slope(), Interval{});
    }
    case ProcessKind::kLaplaceCase45: {
      require_positive(b, "b", kind);
      return ItoProcess1D(
          kind, a, b, reverting_drift(a),
          [a, b](double z) {
            const double amp = 2.0 * b * std::abs(z - a) + 2.0 * b * b;
            return amp * amp;
          },
          unit_negative_slope(), Interval{});
    }
    case ProcessKind::kCustom:
      break;
  }
  throw Error(ErrorCode::kUnknownKind,
              "make_standard_process does not build custom processes");
}

std::optional<ScalarFn> stationary_pdf(ProcessKind kind, double a, double b) {
  switch (kind) {
    case ProcessKind::kGaussian:
      return ScalarFn([a, b](double z) {
        return std::exp(-0.5 * (z - a) * (z - a) / b) / std::sqrt(2.0 * kPi * b);
      });
    case ProcessKind::kBeta: {
      const double log_norm =
          std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
      return ScalarFn([a, b, log_norm](double z) {
        if (z <= 0.0 || z >= 1.0) return 0.0;
        return std::exp((a - 1.0) * std::log(z) + (b - 1.0) * std::log1p(-z) -
                        log_norm);
      });
    }
    case ProcessKind::kGamma: {
      const double log_norm = a * std::log(b) - std::lgamma(a);
      return ScalarFn([a, b, log_norm](double z) {
        if (z <= 0.0) return 0.0;
        return std::exp(log_norm + (a - 1.0) * std::log(z) - b * z);
      });
    }
    case ProcessKind::kLaplace:
      return ScalarFn([a, b](double z) {
        return std::exp(-std::abs(z - a) / b) / (2.0 * b);
      });
    case ProcessKind::kLaplaceCase45:
    case ProcessKind::kCustom:
      break;
  }
  return std::nullopt;
}

std::optional<Moments> stationary_moments(ProcessKind kind, double a,
                                          double b) {
  switch (kind) {
    case ProcessKind::kGaussian: return Moments{a, b};
    case ProcessKind::kBeta:
      return Moments{a / (a + b), a * b / ((a + b) * (a + b) * (a + b + 1.0))};
    case ProcessKind::kGamma: return Moments{a / b, a / (b * b)};
    case ProcessKind::kLaplace: return Moments{a, 2.0 * b * b};
    case ProcessKind::kLaplaceCase45:
    case ProcessKind::kCustom:
      break;
  }
  return std::nullopt;
}

namespace {

double simpson_step(const ScalarFn& f, double a, double fa, double b, double fb,
                    double m, double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const ScalarFn& f, double lo, double hi,
                        double abs_tol, int max_depth) {
  if (hi == lo) return 0.0;
  const double fa = f(lo);
  const double fb = f(hi);
  const double m = 0.5 * (lo + hi);
  const double fm = f(m);
  const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, lo, fa, hi, fb, m, fm, whole, abs_tol, max_depth);
}

namespace {

// Finds a finite truncation point for an infinite support end by doubling
// outward from `start` until the density is negligible.
double truncate_end(const ScalarFn& pdf, double start, double direction,
                    double peak) {
  double step = 0.01;
  double z = start;
  bool past_mass = false;
  for (int i = 0; i < 400; ++i) {
    z = start + direction * step;
    const double p = pdf(z);
    if (p > 1e-3 * peak) past_mass = true;
    if (past_mass && p < 1e-16 * peak) return z;
    step *= 1.05;
  }
  return z;
}

// Cumulative integral of mu*p tabulated on a uniform grid, evaluated between
// nodes by cubic Hermite interpolation (the derivative mu*p is exact).
struct TabulatedDiffusion {
  double lo = 0.0;
  double h = 0.0;
  std::vector<double> nodes;
  std::vector<double> cumulative;
  ScalarFn pdf;
  ScalarFn drift;

  double integral(double z) const {
    const int n = static_cast<int>(nodes.size());
    double t = (z - lo) / h;
    int k = static_cast<int>(std::floor(t));
    k = std::clamp(k, 0, n - 2);
    const double z0 = nodes[k];
    const double z1 = nodes[k + 1];
    const double s = std::clamp((z - z0) / h, 0.0, 1.0);
    const double d0 = drift(z0) * pdf(z0) * h;
    const double d1 = drift(z1) * pdf(z1) * h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * cumulative[k] + (s3 - 2 * s2 + s) * d0 +
           (-2 * s3 + 3 * s2) * cumulative[k + 1] + (s3 - s2) * d1;
  }

  double operator()(double z) const {
    const double p = pdf(z);
    if (!(p > 0.0)) return 0.0;
    return std::max(0.0, 2.0 * integral(z) / p);
  }
};

}  // namespace

ItoProcess1D make_process_from_pdf(const ScalarFn& pdf, const ScalarFn& drift,
                                   Interval support,
                                   const PdfProcessOptions& options) {
  require(options.grid_points >= 3, ErrorCode::kInvalidParameter,
          "grid_points must be at least 3");
  require(support.lo < support.hi, ErrorCode::kInvalidParameter,
          "empty support");

  double lo = support.lo;
  double hi = support.hi;
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    const double anchor = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
    double peak = pdf(anchor);
    for (int i = 1; i < 80; ++i) {
      const double reach = std::pow(1.25, i) - 1.0;
      if (!std::isfinite(lo)) peak = std::max(peak, pdf(anchor - reach));
      if (!std::isfinite(hi)) peak = std::max(peak, pdf(anchor + reach));
    }
    peak = std::max(peak, 1e-300);
    if (!std::isfinite(lo)) lo = truncate_end(pdf, anchor, -1.0, peak);
    if (!std::isfinite(hi)) hi = truncate_end(pdf, anchor, 1.0, peak);
  }

  const int n = options.grid_points;
  const double h = (hi - lo) / (n - 1);
  std::vector<double> nodes(n);
  for (int k = 0; k < n; ++k) nodes[k] = lo + h * k;
  nodes[n - 1] = hi;

  for (int k = 1; k + 1 < n; ++k) {
    const double p = pdf(nodes[k]);
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::kNonpositiveDensity,
                  "density must be strictly positive on the interior (z=" +
                      std::to_string(nodes[k]) + ")");
    }
  }

  const ScalarFn integrand = [&](double z) { return drift(z) * pdf(z); };
  const double seg_tol = options.abs_tol / (n - 1);
  std::vector<double> piece(n - 1);
  double abs_total = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    piece[k] = adaptive_simpson(integrand, nodes[k], nodes[k + 1], seg_tol);
    abs_total += adaptive_simpson(
        [&](double z) { return std::abs(integrand(z)); }, nodes[k],
        nodes[k + 1], seg_tol);
  }

  // Forward and backward accumulations; each node takes the shorter tail so
  // both ends keep relative accuracy where p is tiny.
  std::vector<double> forward(n, 0.0);
  std::vector<double> backward(n, 0.0);
  for (int k = 1; k < n; ++k) forward[k] = forward[k - 1] + piece[k - 1];
  for (int k = n - 2; k >= 0; --k) backward[k] = backward[k + 1] - piece[k];
  const double total = forward[n - 1];
  if (std::abs(total) > 1e-6 * std::max(abs_total, 1e-300) &&
      std::abs(total) > options.abs_tol) {
    throw Error(ErrorCode::kNegativeDiffusion,
                "drift and density are inconsistent: integral of mu*p over the "
                "support is " + std::to_string(total) + ", expected 0");
  }

  std::vector<double> mass(n, 0.0);
  for (int k = 1; k < n; ++k) {
    mass[k] = mass[k - 1] +
              adaptive_simpson(pdf, nodes[k - 1], nodes[k], seg_tol);
  }
  std::vector<double> cumulative(n);
  for (int k = 0; k < n; ++k) {
    cumulative[k] = mass[k] <= 0.5 * mass[n - 1] ? forward[k] : backward[k];
  }

  auto table = std::make_shared<TabulatedDiffusion>();
  table->lo = lo;
  table->h = h;
  table->nodes = std::move(nodes);
  table->cumulative = std::move(cumulative);
  table->pdf = pdf;
  table->drift = drift;

  double max_sigma2 = 0.0;
  double min_sigma2 = 0.0;
  for (int k = 1; k + 1 < n; ++k) {
    const double z = table->nodes[k];
    const double value = 2.0 * table->cumulative[k] / pdf(z);
    max_sigma2 = std::max(max_sigma2, value);
    min_sigma2 = std::min(min_sigma2, value);
  }
  if (min_sigma2 < -options.negative_tol * std::max(max_sigma2, 1.0)) {
    throw Error(ErrorCode::kNegativeDiffusion,
                "quadrature produced sigma^2 = " + std::to_string(min_sigma2) +
                    " < 0; drift and density are inconsistent");
  }

  const double probe = 1e-6 * std::max(1.0, std::abs(hi - lo));
  ScalarFn slope = [drift, probe](double z) {
    return (drift(z + probe) - drift(z - probe)) / (2.0 * probe);
  };
  return ItoProcess1D(
      ProcessKind::kCustom, 0.0, 0.0, drift,
      [table](double z) { return (*table)(z); }, std::move(slope),
      Interval{support.lo, support.hi});
}

double fokker_planck_residual(const ItoProcess1D& proc, const ScalarFn& pdf,
                              double z, double h) {
  require(h > 0.0, ErrorCode::kInvalidParameter, "step h must be positive");
  const Interval& s = proc.support();
  if (!s.contains(z - 2.0 * h) || !s.contains(z + 2.0 * h)) {
    throw Error(ErrorCode::kOutOfSupport,
                "residual stencil around z=" + std::to_string(z) +
                    " leaves the support");
  }
  auto flux = [&](double x) { return proc.drift(x) * pdf(x); };
  auto spread = [&](double x) { return proc.diffusion_sq(x) * pdf(x); };
  const double d1 = (-flux(z + 2 * h) + 8 * flux(z + h) - 8 * flux(z - h) +
                     flux(z - 2 * h)) /
                    (12.0 * h);
  const double d2 = (-spread(z + 2 * h) + 16 * spread(z + h) - 30 * spread(z) +
                     16 * spread(z - h) - spread(z - 2 * h)) /
                    (12.0 * h * h);
  return 0.5 * d2 - d1;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1], 53 bits.
double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t counter) {
  const std::uint64_t key =
      splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  const std::uint64_t r1 = splitmix64(key ^ splitmix64(2 * counter));
  const std::uint64_t r2 = splitmix64(key ^ splitmix64(2 * counter + 1));
  const double u1 = to_unit(r1);
  const double u2 = to_unit(r2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

namespace {

double euler_step(const ItoProcess1D& proc, double z, double dt, double dw) {
  const double next = z + proc.drift(z) * dt + proc.diffusion(z) * dw;
  return proc.support().clamp(next);
}

}  // namespace

SamplePath sample_path(const ItoProcess1D& proc, double z0, double dt,
                       int n_steps, std::uint64_t seed, std::uint64_t stream) {
  require(dt > 0.0, ErrorCode::kInvalidParameter, "dt must be positive");
  require(n_steps >= 0, ErrorCode::kInvalidParameter, "n_steps must be >= 0");
  if (!proc.support().contains(z0)) {
    throw Error(ErrorCode::kOutOfSupport, "z0 outside process support");
  }
  SamplePath path;
  path.dt = dt;
  path.seed = seed;
  path.stream = stream;
  path.values.resize(n_steps + 1);
  path.wiener_increments.resize(n_steps);
  const double sqrt_dt = std::sqrt(dt);
  double z = z0;
  path.values[0] = z;
  for (int k = 0; k < n_steps; ++k) {
    const double dw = sqrt_dt * counter_normal(seed, stream, k);
    path.wiener_increments[k] = dw;
    z = euler_step(proc, z, dt, dw);
    path.values[k + 1] = z;
  }
  return path;
}

std::vector<double> replay_path(const ItoProcess1D& proc, double z0, double dt,
                                const std::vector<double>& increments) {
  std::vector<double> values(increments.size() + 1);
  double z = z0;
  values[0] = z;
  for (std::size_t k = 0; k < increments.size(); ++k) {
    z = euler_step(proc, z, dt, increments[k]);
    values[k + 1] = z;
  }
  return values;
}

DisturbanceBank::DisturbanceBank(std::vector<ItoProcess1D> processes,
                                 std::vector<int> bus_assignment, Vector z0)
    : processes_(std::move(processes)),
      buses_(std::move(bus_assignment)),
      z0_(std::move(z0)) {
  const auto n = processes_.size();
  if (buses_.size() != n || static_cast<std::size_t>(z0_.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "disturbance bank needs one bus and one z0 per process");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (!processes_[k].support().contains(z0_(k))) {
      throw Error(ErrorCode::kOutOfSupport,
                  "z0 of disturbance " + std::to_string(k) +
                      " lies outside its support");
    }
  }
}

Vector DisturbanceBank::drift(const Vector& z) const {
  Vector out(size());
  for (int k = 0; k < size(); ++k) out(k) = processes_[k].drift(z(k));
  return out;
}

Vector DisturbanceBank::diffusion_sq(const Vector& z) const {
  Vector out(size());
  for (int k = 0; k < size(); ++k) out(k) = processes_[k].diffusion_sq(z(k));
  return out;
}

Vector DisturbanceBank::drift_slope(const Vector& z) const {
  Vector out(size());
  for (int k = 0; k < size(); ++k) out(k) = processes_[k].drift_slope(z(k));
  return out;
}

DisturbanceBank DisturbanceBank::with_z0(Vector z0) const {
  return DisturbanceBank(processes_, buses_, std::move(z0));
}

DisturbanceBank DisturbanceBank::deterministic() const {
  std::vector<ItoProcess1D> procs;
  procs.reserve(processes_.size());
  for (const auto& p : processes_) procs.push_back(p.deterministic());
  return DisturbanceBank(std::move(procs), buses_, z0_);
}

ItoProcess1D process_from_json(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("kind")) {
    throw Error(ErrorCode::kParseError, "process block needs a \"kind\" field");
  }
  const ProcessKind kind =
      process_kind_from_string(spec.at("kind").get<std::string>());
  if (kind != ProcessKind::kCustom) {
    if (!spec.contains("a") || !spec.contains("b")) {
      throw Error(ErrorCode::kParseError,
                  "process block of kind " + std::string(to_string(kind)) +
                      " needs \"a\" and \"b\"");
    }
    return make_standard_process(kind, spec.at("a").get<double>(),
                                 spec.at("b").get<double>());
  }

  if (!spec.contains("pdf_grid") || !spec.contains("drift")) {
    throw Error(ErrorCode::kParseError,
                "custom process needs \"pdf_grid\" and \"drift\"");
  }
  auto grid = std::make_shared<std::vector<std::pair<double, double>>>();
  for (const auto& row : spec.at("pdf_grid")) {
    if (!row.is_array() || row.size() != 2) {
      throw Error(ErrorCode::kParseError, "pdf_grid rows must be [z, p]");
    }
    grid->emplace_back(row[0].get<double>(), row[1].get<double>());
  }
  if (grid->size() < 2) {
    throw Error(ErrorCode::kParseError, "pdf_grid needs at least two rows");
  }
  std::sort(grid->begin(), grid->end());
  for (std::size_t k = 1; k < grid->size(); ++k) {
    if (!((*grid)[k].first > (*grid)[k - 1].first)) {
      throw Error(ErrorCode::kParseError, "pdf_grid abscissae must be distinct");
    }
  }
  ScalarFn pdf = [grid](double z) {
    const auto& g = *grid;
    if (z <= g.front().first) return g.front().second;
    if (z >= g.back().first) return g.back().second;
    auto it = std::upper_bound(
        g.begin(), g.end(), z,
        [](double v, const std::pair<double, double>& e) { return v < e.first; });
    const auto& [z1, p1] = *it;
    const auto& [z0, p0] = *(it - 1);
    return p0 + (p1 - p0) * (z - z0) / (z1 - z0);
  };

  const auto& drift_spec = spec.at("drift");
  const std::string type = drift_spec.value("type", "linear");
  if (type != "linear") {
    throw Error(ErrorCode::kParseError, "unsupported drift type '" + type + "'");
  }
  const double mean = drift_spec.at("mean").get<double>();
  const Interval support{grid->front().first, grid->back().first};
  ItoProcess1D proc = make_process_from_pdf(pdf, reverting_drift(mean), support);
  return ItoProcess1D(ProcessKind::kCustom, mean, 0.0,
                      reverting_drift(mean),
                      [proc](double z) { return proc.diffusion_sq(z); },
                      unit_negative_slope(), support);
}

}  // namespace itoagc
