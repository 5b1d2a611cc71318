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

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "itoagc/common.hpp"

namespace itoagc {

using ScalarFn = std::function<double(double)>;

enum class ProcessKind {
  kGaussian,
  kBeta,
  kGamma,
  kLaplace,
  /// Laplace-type drift with sigma(z) = 2b|z-a| + 2b^2 used verbatim as the
  /// diffusion *amplitude* (so diffusion_sq is its square).
  kLaplaceCase45,
  kCustom,
};

std::string_view to_string(ProcessKind kind);
ProcessKind process_kind_from_string(std::string_view name);

/// Scalar Ito process dZ = mu(Z) dt + sigma(Z) dW.
///
/// Immutable after construction. Named kinds evaluate closed-form
/// coefficients; custom processes carry a tabulated diffusion built by
/// make_process_from_pdf.
class ItoProcess1D {
 public:
  ItoProcess1D(ProcessKind kind, double a, double b, ScalarFn drift,
               ScalarFn diffusion_sq, ScalarFn drift_slope, Interval support);

  ProcessKind kind() const { return kind_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const Interval& support() const { return support_; }

  double drift(double z) const { return drift_(z); }
  double diffusion_sq(double z) const { return diffusion_sq_(z); }
  double diffusion(double z) const;
  /// d(mu)/dz; every built-in kind has affine drift so this is constant.
  double drift_slope(double z) const { return drift_slope_(z); }

  /// Same process with diffusion_sq multiplied by `factor` (kind becomes
  /// custom). Used to build deliberately non-stationary variants.
  ItoProcess1D with_scaled_diffusion(double factor) const;
  /// Same drift, zero diffusion.
  ItoProcess1D deterministic() const;

 private:
  ProcessKind kind_;
  double a_;
  double b_;
  ScalarFn drift_;
  ScalarFn diffusion_sq_;
  ScalarFn drift_slope_;
  Interval support_;
};

/// Table of drift/diffusion pairs for the four standard distributions plus
/// the case-study Laplace variant.
ItoProcess1D make_standard_process(ProcessKind kind, double a, double b);

/// Closed-form stationary density of a named kind (not available for the
/// case-study Laplace variant or custom processes).
std::optional<ScalarFn> stationary_pdf(ProcessKind kind, double a, double b);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of the target distribution of a named kind.
std::optional<Moments> stationary_moments(ProcessKind kind, double a, double b);

struct PdfProcessOptions {
  /// Number of nodes of the cached cumulative integral.
  int grid_points = 2048;
  double abs_tol = 1e-10;
  /// Relative tolerance (to the largest diffusion value) below which a
  /// negative quadrature result is treated as round-off and clipped to 0.
  double negative_tol = 1e-8;
};

/// Builds the custom process whose stationary density is `pdf` for the
/// given drift: sigma^2(z) = 2 * (int_lo^z mu p) / p(z).
///
/// Infinite support ends are truncated where the density falls below
/// 1e-16 of its largest sampled value.
ItoProcess1D make_process_from_pdf(const ScalarFn& pdf, const ScalarFn& drift,
                                   Interval support,
                                   const PdfProcessOptions& options = {});

/// Steady-state Fokker-Planck residual 0.5 (sigma^2 p)'' - (mu p)' at z,
/// using five-point central differences with step h.
double fokker_planck_residual(const ItoProcess1D& proc, const ScalarFn& pdf,
                              double z, double h);

/// Adaptive Simpson quadrature of f over [lo, hi].
double adaptive_simpson(const ScalarFn& f, double lo, double hi,
                        double abs_tol, int max_depth = 50);

/// Counter-based standard normal generator keyed on (seed, stream, counter).
/// Stateless, so scenario generation can be split across workers without
/// changing any draw.
double counter_normal(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t counter);

struct SamplePath {
  double dt = 0.0;
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> wiener_increments;
};

/// Euler-Maruyama path: z_{k+1} = clamp(z_k + mu dt + sigma dW_k).
SamplePath sample_path(const ItoProcess1D& proc, double z0, double dt,
                       int n_steps, std::uint64_t seed,
                       std::uint64_t stream = 0);

/// Re-integrates stored increments; reproduces `values` exactly.
std::vector<double> replay_path(const ItoProcess1D& proc, double z0, double dt,
                                const std::vector<double>& increments);

/// Independent disturbance sources, one per wind bus.
class DisturbanceBank {
 public:
  DisturbanceBank() = default;
  DisturbanceBank(std::vector<ItoProcess1D> processes,
                  std::vector<int> bus_assignment, Vector z0);

  int size() const { return static_cast<int>(processes_.size()); }
  const ItoProcess1D& process(int k) const { return processes_.at(k); }
  const std::vector<ItoProcess1D>& processes() const { return processes_; }
  const std::vector<int>& buses() const { return buses_; }
  const Vector& z0() const { return z0_; }

  Vector drift(const Vector& z) const;
  Vector diffusion_sq(const Vector& z) const;
  /// Diagonal Jacobian of the drift.
  Vector drift_slope(const Vector& z) const;

  DisturbanceBank with_z0(Vector z0) const;
  /// Every process replaced by its zero-diffusion counterpart.
  DisturbanceBank deterministic() const;

 private:
  std::vector<ItoProcess1D> processes_;
  std::vector<int> buses_;
  Vector z0_;
};

/// Parses one process block, e.g. {"kind": "laplace", "a": 0, "b": 0.05}.
ItoProcess1D process_from_json(const nlohmann::json& spec);

}  // namespace itoagc
