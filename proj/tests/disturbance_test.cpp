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

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

namespace itoagc {
namespace {

TEST(StandardProcess, LaplaceCoefficients) {
  const auto p = make_standard_process(ProcessKind::kLaplace, 0.0, 0.05);
  EXPECT_DOUBLE_EQ(p.drift(0.1), -0.1);
  EXPECT_NEAR(p.diffusion_sq(0.1), 2 * 0.05 * 0.1 + 2 * 0.05 * 0.05, 1e-15);
  EXPECT_NEAR(p.diffusion_sq(0.1), 0.015, 1e-15);
}

TEST(StandardProcess, GaussianDriftVanishesAtMean) {
  const auto p = make_standard_process(ProcessKind::kGaussian, 1.5, 0.3);
  EXPECT_DOUBLE_EQ(p.drift(1.5), 0.0);
  EXPECT_DOUBLE_EQ(p.diffusion_sq(1.5), 0.6);
}

TEST(StandardProcess, GammaCoefficients) {
  const auto p = make_standard_process(ProcessKind::kGamma, 2.0, 4.0);
  EXPECT_DOUBLE_EQ(p.drift(0.5), 0.0);
  EXPECT_DOUBLE_EQ(p.diffusion_sq(0.5), 0.25);
  EXPECT_EQ(p.support().lo, 0.0);
  EXPECT_FALSE(p.support().bounded_above());
}

TEST(StandardProcess, BetaCoefficientsAndSupport) {
  const auto p = make_standard_process(ProcessKind::kBeta, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(p.drift(0.4), 0.0);
  EXPECT_NEAR(p.diffusion_sq(0.5), 2.0 / 5.0 * 0.25, 1e-15);
  EXPECT_EQ(p.support().lo, 0.0);
  EXPECT_EQ(p.support().hi, 1.0);
}

TEST(StandardProcess, CaseStudyVariantSquaresTheAmplitude) {
  const auto p = make_standard_process(ProcessKind::kLaplaceCase45, 0.0, 0.05);
  const double amp = 0.1 * 0.2 + 0.005;
  EXPECT_NEAR(p.diffusion_sq(0.2), amp * amp, 1e-16);
  EXPECT_NEAR(p.diffusion_sq(-0.2), amp * amp, 1e-16);
}

TEST(StandardProcess, InvalidParameters) {
  EXPECT_THROW(make_standard_process(ProcessKind::kBeta, 0.0, 1.0), Error);
  EXPECT_THROW(make_standard_process(ProcessKind::kGamma, 2.0, -1.0), Error);
  EXPECT_THROW(make_standard_process(ProcessKind::kLaplace, 0.0, 0.0), Error);
  EXPECT_THROW(make_standard_process(ProcessKind::kGaussian, 0.0, -1.0), Error);
  try {
    make_standard_process(ProcessKind::kBeta, -1.0, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidParameter);
  }
  try {
    process_kind_from_string("weibull");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownKind);
  }
}

TEST(ProcessFromPdf, StandardNormalGivesConstantDiffusion) {
  const ScalarFn pdf = [](double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2 * kPi);
  };
  const auto proc =
      make_process_from_pdf(pdf, [](double z) { return -z; }, Interval{});
  for (double z = -4.0; z <= 4.0; z += 0.173) {
    EXPECT_NEAR(proc.diffusion_sq(z), 2.0, 1e-6) << "z=" << z;
  }
}

TEST(ProcessFromPdf, GammaMatchesClosedForm) {
  const auto pdf = *stationary_pdf(ProcessKind::kGamma, 2.0, 4.0);
  const auto proc = make_process_from_pdf(
      pdf, [](double z) { return -(z - 0.5); }, Interval{0.0, kInf});
  double worst = 0.0;
  for (double z = 0.02; z <= 3.0; z += 0.0137) {
    const double expected = 2.0 * z / 4.0;
    worst = std::max(worst, std::abs(proc.diffusion_sq(z) - expected) / expected);
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(ProcessFromPdf, UniformGivesParabola) {
  const auto proc = make_process_from_pdf([](double) { return 1.0; },
                                          [](double z) { return -(z - 0.5); },
                                          Interval{0.0, 1.0});
  for (double z = 0.0; z <= 1.0; z += 0.01) {
    EXPECT_NEAR(proc.diffusion_sq(z), z * (1 - z), 1e-9);
  }
}

TEST(ProcessFromPdf, InconsistentDriftIsRejected) {
  try {
    make_process_from_pdf([](double) { return 1.0; },
                          [](double z) { return -(z - 0.8); },
                          Interval{0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNegativeDiffusion);
  }
}

TEST(ProcessFromPdf, ZeroDensityInsideSupportIsRejected) {
  try {
    make_process_from_pdf(
        [](double z) { return std::abs(z - 0.5) < 0.1 ? 0.0 : 1.0; },
        [](double z) { return -(z - 0.5); }, Interval{0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonpositiveDensity);
  }
}

TEST(ProcessFromPdf, CustomJsonBlock) {
  const auto proc = process_from_json(nlohmann::json::parse(
      R"({"kind": "custom", "pdf_grid": [[0, 1], [0.5, 1], [1, 1]],
          "drift": {"type": "linear", "mean": 0.5}})"));
  EXPECT_EQ(proc.kind(), ProcessKind::kCustom);
  EXPECT_NEAR(proc.diffusion_sq(0.3), 0.21, 1e-9);
  EXPECT_DOUBLE_EQ(proc.drift_slope(0.3), -1.0);
}

TEST(FokkerPlanck, GaussianIsStationary) {
  const auto p = make_standard_process(ProcessKind::kGaussian, 0.0, 1.0);
  const auto pdf = *stationary_pdf(ProcessKind::kGaussian, 0.0, 1.0);
  EXPECT_LT(std::abs(fokker_planck_residual(p, pdf, 0.3, 1e-4)), 1e-5);
}

TEST(FokkerPlanck, LaplaceIsStationary) {
  const auto p = make_standard_process(ProcessKind::kLaplace, 0.0, 0.05);
  const auto pdf = *stationary_pdf(ProcessKind::kLaplace, 0.0, 0.05);
  EXPECT_LT(std::abs(fokker_planck_residual(p, pdf, 0.2, 1e-4)), 1e-5);
}

TEST(FokkerPlanck, UniformDensityIsNotStationaryForGaussianProcess) {
  const auto p = make_standard_process(ProcessKind::kGaussian, 0.0, 1.0);
  const ScalarFn pdf = [](double z) { return std::abs(z) <= 1.0 ? 0.5 : 0.0; };
  const double r = fokker_planck_residual(p, pdf, 0.3, 1e-4);
  EXPECT_GT(std::abs(r), 0.1);
  EXPECT_NEAR(r, 0.5, 1e-9);
}

TEST(FokkerPlanck, StencilOutsideSupportThrows) {
  const auto p = make_standard_process(ProcessKind::kBeta, 2.0, 2.0);
  const auto pdf = *stationary_pdf(ProcessKind::kBeta, 2.0, 2.0);
  try {
    fokker_planck_residual(p, pdf, 1e-5, 1e-4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfSupport);
  }
}

// Every named kind against its closed-form density on 50 interior points.
TEST(FokkerPlanck, AllNamedKindsOnGrid) {
  struct Row {
    ProcessKind kind;
    double a, b, lo, hi;
  };
  const Row rows[] = {
      {ProcessKind::kGaussian, 0.5, 0.2, -0.8, 1.8},
      {ProcessKind::kBeta, 2.0, 5.0, 0.02, 0.95},
      {ProcessKind::kGamma, 2.0, 4.0, 0.02, 2.5},
      {ProcessKind::kLaplace, 0.0, 0.05, 0.003, 0.3},
  };
  for (const auto& row : rows) {
    const auto proc = make_standard_process(row.kind, row.a, row.b);
    const auto pdf = *stationary_pdf(row.kind, row.a, row.b);
    for (int i = 0; i < 50; ++i) {
      double z = row.lo + (row.hi - row.lo) * i / 49.0;
      if (row.kind == ProcessKind::kLaplace && i % 2 == 1) z = -z;
      EXPECT_LT(std::abs(fokker_planck_residual(proc, pdf, z, 1e-4)), 1e-5)
          << to_string(row.kind) << " z=" << z;
    }
  }
}

TEST(SamplePath, DeterministicLimitMatchesOde) {
  const ItoProcess1D proc(ProcessKind::kCustom, 0, 0,
                          [](double z) { return -z; },
                          [](double) { return 0.0; },
                          [](double) { return -1.0; }, Interval{});
  const auto path = sample_path(proc, 1.0, 1e-3, 1000, 7);
  EXPECT_NEAR(path.values.back(), std::pow(1 - 1e-3, 1000), 1e-14);
  EXPECT_LT(std::abs(path.values.back() - std::exp(-1.0)) / std::exp(-1.0), 1e-3);
}

TEST(SamplePath, ReproducibleAndReplayable) {
  const auto p = make_standard_process(ProcessKind::kLaplace, 0.0, 0.05);
  const auto a = sample_path(p, 0.0, 0.01, 500, 42, 3);
  const auto b = sample_path(p, 0.0, 0.01, 500, 42, 3);
  const auto c = sample_path(p, 0.0, 0.01, 500, 43, 3);
  ASSERT_EQ(a.wiener_increments.size(), a.values.size() - 1);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  EXPECT_EQ(replay_path(p, 0.0, 0.01, a.wiener_increments), a.values);
}

TEST(SamplePath, ClampedSupportsAreRespected) {
  const auto beta = make_standard_process(ProcessKind::kBeta, 0.3, 0.3);
  const auto gamma = make_standard_process(ProcessKind::kGamma, 0.5, 1.0);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto pb = sample_path(beta, 0.5, 0.05, 400, 11, s);
    const auto pg = sample_path(gamma, 0.5, 0.05, 400, 11, s);
    for (double v : pb.values) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    for (double v : pg.values) ASSERT_GE(v, 0.0);
  }
}

TEST(SamplePath, OutOfSupportStartIsRejected) {
  const auto beta = make_standard_process(ProcessKind::kBeta, 2.0, 2.0);
  EXPECT_THROW(sample_path(beta, 1.5, 0.01, 10, 1), Error);
}

struct EnsembleStats {
  double mean;
  double variance;
};

EnsembleStats ensemble_end(const ItoProcess1D& proc, double z0, double dt,
                           int steps, int paths, std::uint64_t seed) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < paths; ++i) {
    const double v = sample_path(proc, z0, dt, steps, seed, i).values.back();
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / paths;
  return {mean, (sum_sq - paths * mean * mean) / (paths - 1)};
}

TEST(SamplePath, OrnsteinUhlenbeckEnsembleVariance) {
  const auto p = make_standard_process(ProcessKind::kGaussian, 0.0, 1.0);
  const auto stats = ensemble_end(p, 0.0, 0.01, 2000, 10000, 2024);
  EXPECT_GE(stats.variance, 0.95);
  EXPECT_LE(stats.variance, 1.05);
}

TEST(SamplePath, LaplaceLongRunMoments) {
  const double b = 0.05;
  const auto p = make_standard_process(ProcessKind::kLaplace, 0.0, b);
  const auto stats = ensemble_end(p, 0.0, 0.01, 1000, 10000, 99);
  EXPECT_GE(stats.mean, -0.01);
  EXPECT_LE(stats.mean, 0.01);
  const double sd = std::sqrt(stats.variance);
  EXPECT_GE(sd, b * std::sqrt(2.0) * 0.9);
  EXPECT_LE(sd, b * std::sqrt(2.0) * 1.1);
}

TEST(CounterNormal, StatelessAndRoughlyStandard) {
  EXPECT_EQ(counter_normal(1, 2, 3), counter_normal(1, 2, 3));
  EXPECT_NE(counter_normal(1, 2, 3), counter_normal(1, 2, 4));
  EXPECT_NE(counter_normal(1, 2, 3), counter_normal(1, 3, 3));
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = counter_normal(5, 0, i);
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(DisturbanceBank, ValidatesShapesAndSupport) {
  const auto beta = make_standard_process(ProcessKind::kBeta, 2.0, 2.0);
  EXPECT_THROW(DisturbanceBank({beta}, {1, 2}, Vector::Zero(1)), Error);
  Vector z0(1);
  z0 << 2.0;
  EXPECT_THROW(DisturbanceBank({beta}, {1}, z0), Error);
  z0 << 0.3;
  const DisturbanceBank bank({beta}, {1}, z0);
  EXPECT_DOUBLE_EQ(bank.drift(z0)(0), -(0.3 - 0.5));
  EXPECT_DOUBLE_EQ(bank.deterministic().diffusion_sq(z0)(0), 0.0);
}

}  // namespace
}  // namespace itoagc
