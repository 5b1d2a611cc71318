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

#include "itoagc/grid.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "test_util.hpp"

namespace itoagc {
namespace {

using nlohmann::json;
using testing::toy3;
using testing::toy3_json;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::kIoError;
}

TEST(LoadCase, Toy3Dimensions) {
  const auto grid = toy3();
  EXPECT_EQ(grid.generators.size(), 3u);
  EXPECT_EQ(grid.lines.size(), 3u);
  EXPECT_EQ(grid.areas.size(), 1u);
  EXPECT_EQ(grid.wind.size(), 1u);
  const auto sys = build_linear_system(grid);
  EXPECT_EQ(sys.nx(), 6);
  EXPECT_EQ(sys.nu(), 3);
  EXPECT_EQ(sys.nz(), 1);
}

TEST(LoadCase, Ieee118Dimensions) {
  const auto grid = load_case(data_path("ieee118.json"));
  EXPECT_EQ(grid.generators.size(), 54u);
  EXPECT_EQ(grid.lines.size(), 186u);
  const auto sys = build_linear_system(grid);
  EXPECT_EQ(sys.nx(), 54 + 186);
}

TEST(LoadCase, ZeroDroopRejected) {
  auto doc = toy3_json();
  doc["generators"][1]["R"] = 0.0;
  EXPECT_EQ(code_of([&] { case_from_json(doc); }), ErrorCode::kValidationError);
}

TEST(LoadCase, NonpositiveInertiaRejected) {
  auto doc = toy3_json();
  doc["generators"][0]["H"] = -1.0;
  EXPECT_EQ(code_of([&] { case_from_json(doc); }), ErrorCode::kValidationError);
}

TEST(LoadCase, DanglingReferencesRejected) {
  auto doc = toy3_json();
  doc["lines"][0]["to"] = 99;
  EXPECT_EQ(code_of([&] { case_from_json(doc); }), ErrorCode::kValidationError);
  doc = toy3_json();
  doc["areas"][0]["tie_lines"] = {42};
  EXPECT_EQ(code_of([&] { case_from_json(doc); }), ErrorCode::kValidationError);
  doc = toy3_json();
  doc["wind"][0]["bus"] = 7;
  EXPECT_EQ(code_of([&] { case_from_json(doc); }), ErrorCode::kValidationError);
}

TEST(LoadCase, WindAtBusWithoutGeneratorRejected) {
  auto doc = toy3_json();
  doc["buses"] = {{{"id", 4}, {"D", 1.0}}};
  doc["lines"].push_back({{"id", 4}, {"from", 3}, {"to", 4}, {"x", 1.0}});
  doc["wind"][0]["bus"] = 4;
  EXPECT_EQ(code_of([&] { case_from_json(doc); }), ErrorCode::kValidationError);
}

TEST(LoadCase, ParseErrorsCarryLocation) {
  const auto dir = testing::scratch_dir("grid");
  const auto bad = testing::write_text(dir / "bad.json", "{\n  \"generators\": [\n  ,\n}\n");
  try {
    load_case(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("bad.json:3"), std::string::npos) << e.what();
  }
  auto doc = toy3_json();
  doc["generators"][2].erase("H");
  try {
    case_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("generators[2].H"), std::string::npos);
  }
}

TEST(LinearSystem, StateRowsFollowSwingAndFlowEquations) {
  const auto grid = toy3();
  const auto sys = build_linear_system(grid);
  for (int i = 0; i < 3; ++i) {
    const auto& g = grid.generators[i];
    EXPECT_DOUBLE_EQ(sys.A(i, i), -(g.D + 1.0 / g.R) / g.H);
    EXPECT_DOUBLE_EQ(sys.B(i, i), 1.0 / g.H);
  }
  // Line 1 runs 1 -> 2: leaves generator 0, enters generator 1.
  EXPECT_DOUBLE_EQ(sys.A(0, 3), -1.0 / 5.0);
  EXPECT_DOUBLE_EQ(sys.A(1, 3), 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(sys.A(2, 3), 0.0);
  for (int l = 0; l < 3; ++l) {
    const double b = grid.lines[l].susceptance();
    const int from = grid.generator_index(grid.lines[l].from);
    const int to = grid.generator_index(grid.lines[l].to);
    EXPECT_DOUBLE_EQ(sys.A(3 + l, from), b);
    EXPECT_DOUBLE_EQ(sys.A(3 + l, to), -b);
    EXPECT_DOUBLE_EQ(sys.A.row(3 + l).sum(), 0.0);
    EXPECT_DOUBLE_EQ(sys.A.row(3 + l).cwiseAbs().sum(), 2 * b);
  }
  EXPECT_DOUBLE_EQ(sys.C(2, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(sys.C.cwiseAbs().sum(), 1.0 / 3.0);
}

TEST(LinearSystem, SusceptanceAtFlatStart) {
  Line l;
  l.x = 0.1;
  EXPECT_DOUBLE_EQ(l.susceptance(), 10.0);
  l.theta_from = 0.3;
  l.v_to = 1.05;
  EXPECT_NEAR(l.susceptance(), 10.5 * std::cos(0.3), 1e-12);
}

TEST(LinearSystem, FrequencyRowIsInertiaWeightedAverage) {
  const auto sys = build_linear_system(toy3());
  EXPECT_NEAR(sys.freq_row.head(3).sum() * 2 * kPi, 1.0, 1e-15);
  EXPECT_NEAR(sys.freq_row(0) * 2 * kPi, 5.0 / 12.0, 1e-15);
  const double omega = 0.37;
  Vector s = Vector::Zero(sys.ns());
  s.head(3).setConstant(omega);
  s.tail(sys.nz()).setConstant(0.8);
  s.segment(sys.u_offset(), sys.nu()).setConstant(-0.2);
  EXPECT_NEAR(sys.freq_row * s, omega / (2 * kPi), 1e-15);
}

TEST(LinearSystem, SingleAreaAceIsBiasTimesFrequency) {
  const auto grid = toy3();
  const auto sys = build_linear_system(grid);
  ASSERT_EQ(sys.ace_rows.size(), 1u);
  Vector s = Vector::Zero(sys.ns());
  s.head(3) << 0.01, 0.02, -0.005;
  const double df = sys.freq_row * s;
  EXPECT_NEAR(sys.ace_rows[0] * s, -grid.areas[0].bias * df, 1e-15);
  // Default bias: natural response of the area in pu/Hz.
  const double beta = (1 + 1 / 0.8) + (1 + 1 / 1.0) + (1 + 1 / 1.25);
  EXPECT_NEAR(grid.areas[0].bias, -2 * kPi * beta, 1e-12);
}

TEST(LinearSystem, TieLinesEnterAceWithDirection) {
  auto doc = toy3_json();
  doc["areas"] = {{{"id", 1}, {"bias", -3.0}, {"tie_lines", {2, 3}}},
                  {{"id", 2}, {"bias", -2.0}, {"tie_lines", {2, 3}}}};
  doc["generators"][2]["area"] = 2;
  const auto grid = case_from_json(doc);
  const auto sys = build_linear_system(grid);
  EXPECT_DOUBLE_EQ(sys.ace_rows[0](3 + 1), 1.0);   // 2 -> 3 leaves area 1
  EXPECT_DOUBLE_EQ(sys.ace_rows[0](3 + 2), 1.0);   // 1 -> 3 leaves area 1
  EXPECT_DOUBLE_EQ(sys.ace_rows[1](3 + 1), -1.0);  // enters area 2
  EXPECT_DOUBLE_EQ(sys.ace_rows[1](3 + 2), -1.0);
  EXPECT_DOUBLE_EQ(sys.ace_rows[0](3 + 0), 0.0);
  EXPECT_NEAR(sys.ace_rows[1](0), 2.0 * sys.freq_row(0), 1e-15);
  EXPECT_EQ(sys.input_area, (std::vector<int>{0, 0, 1}));
  EXPECT_NEAR(sys.input_share(0) + sys.input_share(1), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(sys.input_share(2), 1.0);
}

TEST(LinearSystem, UncontrolledDynamicsDissipate) {
  const auto sys = build_linear_system(toy3());
  const Eigen::EigenSolver<Matrix> es(sys.A);
  for (int i = 0; i < sys.nx(); ++i) {
    EXPECT_LE(es.eigenvalues()(i).real(), 1e-12);
  }
}

TEST(LinearSystem, RelabelingPermutesRowsAndColumns) {
  const auto base = build_linear_system(toy3());
  auto doc = toy3_json();
  auto gens = doc["generators"];
  doc["generators"] = {gens[2], gens[0], gens[1]};
  const auto permuted = build_linear_system(case_from_json(doc));
  Eigen::PermutationMatrix<Eigen::Dynamic> p(6);
  p.indices() << 1, 2, 0, 3, 4, 5;  // old index -> new index
  const Matrix expected = p * base.A * p.transpose();
  EXPECT_LT((expected - permuted.A).norm(), 1e-14);
}

TEST(LinearSystem, LoadBusFrequencyIsAlgebraic) {
  auto doc = toy3_json();
  doc["buses"] = {{{"id", 4}, {"D", 2.0}}};
  doc["lines"].push_back({{"id", 4}, {"from", 3}, {"to", 4}, {"x", 1.0}});
  doc["lines"].push_back({{"id", 5}, {"from", 4}, {"to", 1}, {"x", 0.5}});
  const auto sys = build_linear_system(case_from_json(doc));
  EXPECT_EQ(sys.nx(), 3 + 5);
  // omega_4 = (P_34 - P_41) / D_4, so dP_34/dt = B (omega_3 - omega_4).
  EXPECT_DOUBLE_EQ(sys.A(6, 2), 1.0);
  EXPECT_DOUBLE_EQ(sys.A(6, 6), -0.5);
  EXPECT_DOUBLE_EQ(sys.A(6, 7), 0.5);
  EXPECT_DOUBLE_EQ(sys.A(7, 0), -2.0);
  EXPECT_DOUBLE_EQ(sys.A(7, 6), 1.0);
  EXPECT_DOUBLE_EQ(sys.A(7, 7), -1.0);
}

// Cycle-space oracle: flows are consistent iff the sum of P/B around every
// cycle vanishes.
double ring_cycle_sum(const GridCase& grid, const Vector& p0) {
  return p0(0) / grid.lines[0].susceptance() + p0(1) / grid.lines[1].susceptance() -
         p0(2) / grid.lines[2].susceptance();
}

TEST(InitialFlows, ZeroIsConsistent) {
  const auto grid = toy3();
  const auto r = validate_initial_flows(grid, Vector::Zero(3));
  EXPECT_TRUE(r.consistent);
  EXPECT_LE(r.residual, 1e-12);
}

TEST(InitialFlows, RingCirculationIsInconsistent) {
  const auto grid = toy3();
  Vector p0(3);
  p0 << 1, 1, 1;
  // Lines 1->2, 2->3, 1->3: the loop 1-2-3-1 carries 1 + 1 - 1.
  EXPECT_GT(std::abs(ring_cycle_sum(grid, p0)), 1e-6);
  EXPECT_FALSE(validate_initial_flows(grid, p0).consistent);
  p0 << 1, 1, 2;
  EXPECT_NEAR(ring_cycle_sum(grid, p0), 0.0, 1e-15);
  EXPECT_TRUE(validate_initial_flows(grid, p0).consistent);
}

TEST(InitialFlows, TreeAlwaysConsistent) {
  auto doc = toy3_json();
  doc["lines"].erase(2);
  const auto grid = case_from_json(doc);
  for (int trial = 0; trial < 5; ++trial) {
    Vector p0(2);
    p0 << counter_normal(3, 0, trial), counter_normal(3, 1, trial);
    EXPECT_TRUE(validate_initial_flows(grid, p0).consistent);
  }
}

TEST(Constraints, RowsAndKappa) {
  const auto grid = toy3();
  const auto set = build_constraints(grid, 0.95);
  EXPECT_NEAR(set.kappa, std::sqrt(0.95 / 0.05), 1e-12);
  EXPECT_NEAR(set.kappa, 4.3589, 1e-4);
  EXPECT_EQ(set.size(), 2 * (3 + 3 + 1));
  int freq_rows = 0;
  for (const auto& r : set.rows) {
    if (r.label.rfind("freq", 0) == 0) {
      ++freq_rows;
      EXPECT_DOUBLE_EQ(r.bound, 0.1);
    }
  }
  EXPECT_EQ(freq_rows, 2);
}

TEST(Constraints, GeneratorRowIncludesDroop) {
  const auto grid = toy3();
  const auto sys = build_linear_system(grid);
  const auto set = build_constraints(grid, sys, 0.9);
  const auto& row = set.rows[0];
  EXPECT_EQ(row.label, "gen_1+");
  EXPECT_DOUBLE_EQ(row.phi(sys.u_offset()), 1.0);
  EXPECT_DOUBLE_EQ(row.phi(0), -1.0 / 0.8);
  EXPECT_TRUE((set.rows[1].phi + row.phi).isZero());
}

TEST(Constraints, GammaOutOfRange) {
  const auto grid = toy3();
  EXPECT_EQ(code_of([&] { build_constraints(grid, 0.4); }), ErrorCode::kInvalidParameter);
  EXPECT_EQ(code_of([&] { build_constraints(grid, 0.5); }), ErrorCode::kInvalidParameter);
  EXPECT_EQ(code_of([&] { build_constraints(grid, 1.0); }), ErrorCode::kInvalidParameter);
  try {
    kappa_from_gamma(0.4);
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("gamma must exceed 0.5"), std::string::npos);
  }
}

}  // namespace
}  // namespace itoagc
