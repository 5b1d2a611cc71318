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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace itoagc {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::kParseError, where + ": " + msg);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) parse_fail(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where + "." + key, "missing field");
  return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (v.is_string() && v.get<std::string>() == "inf") return kInf;
  if (!v.is_number()) parse_fail(where + "." + key, "expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, const std::string& where,
                 double fallback) {
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) {
    return fallback;
  }
  return number(obj, key, where);
}

int integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) parse_fail(where + "." + key, "expected an integer");
  return v.get<int>();
}

int integer_or(const json& obj, const char* key, const std::string& where,
               int fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return integer(obj, key, where);
}

const json& array(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array()) parse_fail(where + "." + key, "expected an array");
  return v;
}

std::string at(const char* key, std::size_t i) {
  return std::string(key) + "[" + std::to_string(i) + "]";
}

[[noreturn]] void invalid(const std::string& msg) {
  throw Error(ErrorCode::kValidationError, msg);
}

// Signed incidence of bus `bus` on a line: +1 when the flow leaves it.
int incidence(const Line& l, int bus) {
  if (l.from == bus) return 1;
  if (l.to == bus) return -1;
  return 0;
}

}  // namespace

double Line::susceptance() const {
  return v_from * v_to / x * std::cos(theta_from - theta_to);
}

int GridCase::generator_index(int bus) const {
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (generators[i].bus == bus) return static_cast<int>(i);
  }
  return -1;
}

int GridCase::line_index(int id) const {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int GridCase::bus_area(int bus) const {
  for (const auto& g : generators) {
    if (g.bus == bus) return g.area;
  }
  for (const auto& b : load_buses) {
    if (b.bus == bus) return b.area;
  }
  return -1;
}

DisturbanceBank GridCase::disturbance_bank() const {
  std::vector<ItoProcess1D> procs;
  std::vector<int> buses;
  Vector z0(static_cast<Eigen::Index>(wind.size()));
  for (std::size_t k = 0; k < wind.size(); ++k) {
    procs.push_back(wind[k].process);
    buses.push_back(wind[k].bus);
    z0(static_cast<Eigen::Index>(k)) = wind[k].z0;
  }
  return DisturbanceBank(std::move(procs), std::move(buses), std::move(z0));
}

void GridCase::validate() const {
  if (generators.empty()) invalid("case has no generators");
  std::set<int> gen_buses;
  std::set<int> all_buses;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const auto& g = generators[i];
    const std::string w = at("generators", i);
    if (!(g.H > 0)) invalid(w + ".H must be positive");
    if (!(g.R > 0)) invalid(w + ".R must be positive");
    if (!(g.D >= 0)) invalid(w + ".D must be nonnegative");
    if (!(g.p_max > 0)) invalid(w + ".p_max must be positive");
    if (!gen_buses.insert(g.bus).second) {
      invalid(w + ": duplicate generator at bus " + std::to_string(g.bus));
    }
    all_buses.insert(g.bus);
  }
  for (std::size_t i = 0; i < load_buses.size(); ++i) {
    const auto& b = load_buses[i];
    const std::string w = at("buses", i);
    if (!(b.D > 0)) invalid(w + ".D must be positive for a bus without inertia");
    if (gen_buses.count(b.bus)) {
      invalid(w + ": bus " + std::to_string(b.bus) + " already has a generator");
    }
    if (!all_buses.insert(b.bus).second) {
      invalid(w + ": duplicate bus " + std::to_string(b.bus));
    }
  }
  std::set<int> line_ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const std::string w = at("lines", i);
    if (!(l.x > 0)) invalid(w + ".x must be positive");
    if (!(l.v_from > 0) || !(l.v_to > 0)) invalid(w + ": voltages must be positive");
    if (!(l.p_max > 0)) invalid(w + ".p_max must be positive");
    if (l.from == l.to) invalid(w + ": line endpoints coincide");
    if (!all_buses.count(l.from)) {
      invalid(w + ".from references unknown bus " + std::to_string(l.from));
    }
    if (!all_buses.count(l.to)) {
      invalid(w + ".to references unknown bus " + std::to_string(l.to));
    }
    if (!line_ids.insert(l.id).second) {
      invalid(w + ": duplicate line id " + std::to_string(l.id));
    }
  }
  std::set<int> area_ids;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    const auto& a = areas[i];
    if (!area_ids.insert(a.id).second) invalid(at("areas", i) + ": duplicate id");
    for (int t : a.tie_lines) {
      if (!line_ids.count(t)) {
        invalid(at("areas", i) + ".tie_lines references unknown line " +
                std::to_string(t));
      }
    }
  }
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (!area_ids.count(generators[i].area)) {
      invalid(at("generators", i) + ".area references unknown area " +
              std::to_string(generators[i].area));
    }
  }
  for (std::size_t i = 0; i < load_buses.size(); ++i) {
    if (!area_ids.count(load_buses[i].area)) {
      invalid(at("buses", i) + ".area references unknown area " +
              std::to_string(load_buses[i].area));
    }
  }
  if (!(freq_limit > 0)) invalid("limits.freq_hz must be positive");
  for (std::size_t k = 0; k < wind.size(); ++k) {
    const auto& s = wind[k];
    if (!all_buses.count(s.bus)) {
      invalid(at("wind", k) + ".bus references unknown bus " + std::to_string(s.bus));
    }
    if (!gen_buses.count(s.bus)) {
      invalid(at("wind", k) + ".bus " + std::to_string(s.bus) +
              " has no generator; wind must attach to a generator bus");
    }
    if (!s.process.support().contains(s.z0)) {
      invalid(at("wind", k) + ".z0 lies outside the process support");
    }
  }
}

GridCase case_from_json(const json& doc) {
  if (!doc.is_object()) parse_fail("case", "expected a JSON object");
  GridCase grid;
  grid.name = doc.value("name", std::string("case"));
  grid.base_mva = number_or(doc, "base_mva", "case", 100.0);
  grid.nominal_freq = number_or(doc, "nominal_freq", "case", 50.0);
  if (doc.contains("limits")) {
    grid.freq_limit = number_or(doc.at("limits"), "freq_hz", "limits", kInf);
  }

  const json& gens = array(doc, "generators", "case");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string w = at("generators", i);
    Generator g;
    g.bus = integer(gens[i], "bus", w);
    g.H = number(gens[i], "H", w);
    g.D = number(gens[i], "D", w);
    g.R = number(gens[i], "R", w);
    g.p_max = number_or(gens[i], "p_max", w, kInf);
    g.area = integer_or(gens[i], "area", w, 1);
    grid.generators.push_back(g);
  }
  if (doc.contains("buses")) {
    const json& buses = array(doc, "buses", "case");
    for (std::size_t i = 0; i < buses.size(); ++i) {
      const std::string w = at("buses", i);
      LoadBus b;
      b.bus = integer(buses[i], "id", w);
      b.D = number_or(buses[i], "D", w, 1.0);
      b.area = integer_or(buses[i], "area", w, 1);
      grid.load_buses.push_back(b);
    }
  }
  const json& lines = array(doc, "lines", "case");
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string w = at("lines", i);
    Line l;
    l.id = integer_or(lines[i], "id", w, static_cast<int>(i) + 1);
    l.from = integer(lines[i], "from", w);
    l.to = integer(lines[i], "to", w);
    l.x = number(lines[i], "x", w);
    l.v_from = number_or(lines[i], "v_from", w, 1.0);
    l.v_to = number_or(lines[i], "v_to", w, 1.0);
    l.theta_from = number_or(lines[i], "theta_from", w, 0.0);
    l.theta_to = number_or(lines[i], "theta_to", w, 0.0);
    l.p_max = number_or(lines[i], "p_max", w, kInf);
    grid.lines.push_back(l);
  }
  if (doc.contains("areas")) {
    const json& areas = array(doc, "areas", "case");
    for (std::size_t i = 0; i < areas.size(); ++i) {
      const std::string w = at("areas", i);
      Area a;
      a.id = integer(areas[i], "id", w);
      a.bias = number_or(areas[i], "bias", w, std::nan(""));
      if (areas[i].contains("tie_lines")) {
        for (const auto& t : array(areas[i], "tie_lines", w)) {
          if (!t.is_number_integer()) parse_fail(w + ".tie_lines", "expected integers");
          a.tie_lines.push_back(t.get<int>());
        }
      }
      grid.areas.push_back(a);
    }
  } else {
    grid.areas.push_back(Area{1, std::nan(""), {}});
  }
  // Omitted bias: natural frequency response of the area's generators.
  for (auto& a : grid.areas) {
    if (!std::isnan(a.bias)) continue;
    double beta = 0.0;
    for (const auto& g : grid.generators) {
      if (g.area == a.id && g.R > 0) beta += g.D + 1.0 / g.R;
    }
    a.bias = -2.0 * kPi * beta;
  }
  if (doc.contains("wind")) {
    const json& wind = array(doc, "wind", "case");
    for (std::size_t k = 0; k < wind.size(); ++k) {
      const std::string w = at("wind", k);
      try {
        WindSource s{process_from_json(wind[k]), integer(wind[k], "bus", w),
                     number_or(wind[k], "z0", w, 0.0)};
        grid.wind.push_back(std::move(s));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kParseError) throw;
        throw Error(e.code(), w + ": " + e.what());
      }
    }
  }
  grid.validate();
  return grid;
}

GridCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open case file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw Error(ErrorCode::kParseError,
                path + ":" + std::to_string(line) + ": " + e.what());
  }
  try {
    return case_from_json(doc);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string data_path(const std::string& name) {
  namespace fs = std::filesystem;
  if (fs::exists(name)) return name;
#ifdef ITOAGC_DATA_DIR
  const fs::path p = fs::path(ITOAGC_DATA_DIR) / name;
  if (fs::exists(p)) return p.string();
#endif
  return name;
}

Vector LinearSystem::stack(const Vector& x, const Vector& u, const Vector& z) const {
  Vector s(ns());
  s << x, u, z;
  return s;
}

Vector LinearSystem::rhs(const Vector& x, const Vector& u, const Vector& z) const {
  Vector r = A * x;
  if (nu() > 0) r.noalias() += B * u;
  if (nz() > 0) r.noalias() += C * z;
  return r;
}

LinearSystem build_linear_system(const GridCase& grid) {
  const int ng = static_cast<int>(grid.generators.size());
  const int nl = static_cast<int>(grid.lines.size());
  const int nz = static_cast<int>(grid.wind.size());
  const int nx = ng + nl;
  LinearSystem sys;
  sys.A = Matrix::Zero(nx, nx);
  sys.B = Matrix::Zero(nx, ng);
  sys.C = Matrix::Zero(nx, nz);

  for (int i = 0; i < ng; ++i) {
    sys.state_labels.push_back("omega_" + std::to_string(grid.generators[i].bus));
  }
  for (int l = 0; l < nl; ++l) {
    sys.state_labels.push_back("P_" + std::to_string(grid.lines[l].from) + "_" +
                               std::to_string(grid.lines[l].to));
  }

  // Frequency of each bus as a row over X: generators are states, load
  // buses follow from their algebraic balance.
  std::map<int, RowVector> omega_of;
  for (int i = 0; i < ng; ++i) {
    RowVector r = RowVector::Zero(nx);
    r(i) = 1.0;
    omega_of[grid.generators[i].bus] = r;
  }
  for (const auto& b : grid.load_buses) {
    RowVector r = RowVector::Zero(nx);
    for (int l = 0; l < nl; ++l) {
      const int s = incidence(grid.lines[l], b.bus);
      if (s != 0) r(ng + l) = -s / b.D;
    }
    omega_of[b.bus] = r;
  }

  for (int i = 0; i < ng; ++i) {
    const auto& g = grid.generators[i];
    sys.A(i, i) = -(g.D + 1.0 / g.R) / g.H;
    for (int l = 0; l < nl; ++l) {
      const int s = incidence(grid.lines[l], g.bus);
      if (s != 0) sys.A(i, ng + l) = -s / g.H;
    }
    sys.B(i, i) = 1.0 / g.H;
  }
  for (int l = 0; l < nl; ++l) {
    const auto& line = grid.lines[l];
    sys.A.row(ng + l) =
        line.susceptance() * (omega_of.at(line.from) - omega_of.at(line.to));
  }
  for (int k = 0; k < nz; ++k) {
    const int i = grid.generator_index(grid.wind[k].bus);
    sys.C(i, k) = 1.0 / grid.generators[i].H;
  }

  const int ns = nx + ng + nz;
  double h_total = 0.0;
  for (const auto& g : grid.generators) h_total += g.H;
  sys.freq_row = RowVector::Zero(ns);
  for (int i = 0; i < ng; ++i) {
    sys.freq_row(i) = grid.generators[i].H / h_total / (2.0 * kPi);
  }

  std::map<int, int> area_pos;
  for (const auto& a : grid.areas) {
    area_pos[a.id] = static_cast<int>(sys.area_ids.size());
    sys.area_ids.push_back(a.id);
    RowVector row = -a.bias * sys.freq_row;
    for (int t : a.tie_lines) {
      const int l = grid.line_index(t);
      const auto& line = grid.lines[l];
      const int from_area = grid.bus_area(line.from);
      row(ng + l) += from_area == a.id ? 1.0 : -1.0;
    }
    sys.ace_rows.push_back(row);
  }

  sys.input_area.resize(ng);
  sys.input_share = Vector::Zero(ng);
  std::map<int, double> droop_sum;
  for (const auto& g : grid.generators) droop_sum[g.area] += 1.0 / g.R;
  for (int i = 0; i < ng; ++i) {
    const auto& g = grid.generators[i];
    sys.input_area[i] = area_pos.at(g.area);
    sys.input_share(i) = (1.0 / g.R) / droop_sum.at(g.area);
  }
  return sys;
}

FlowConsistency validate_initial_flows(const GridCase& grid, const Vector& p0) {
  require(p0.size() == static_cast<Eigen::Index>(grid.lines.size()),
          ErrorCode::kDimensionMismatch, "P0 must have one entry per line");
  std::map<int, int> col;
  for (const auto& g : grid.generators) col.emplace(g.bus, static_cast<int>(col.size()));
  for (const auto& b : grid.load_buses) col.emplace(b.bus, static_cast<int>(col.size()));
  Matrix m = Matrix::Zero(p0.size(), static_cast<Eigen::Index>(col.size()));
  for (std::size_t l = 0; l < grid.lines.size(); ++l) {
    const auto& line = grid.lines[l];
    const double b = line.susceptance();
    m(static_cast<Eigen::Index>(l), col.at(line.from)) = b;
    m(static_cast<Eigen::Index>(l), col.at(line.to)) = -b;
  }
  FlowConsistency out;
  if (p0.size() == 0) {
    out.consistent = true;
    out.theta = Vector::Zero(static_cast<Eigen::Index>(col.size()));
    return out;
  }
  out.theta = m.completeOrthogonalDecomposition().solve(p0);
  out.residual = (m * out.theta - p0).lpNorm<Eigen::Infinity>();
  out.consistent = out.residual <= 1e-9;
  return out;
}

double kappa_from_gamma(double gamma) {
  require(gamma > 0.5 && gamma < 1.0, ErrorCode::kInvalidParameter,
          "gamma must exceed 0.5 and be below 1");
  return std::sqrt(gamma / (1.0 - gamma));
}

ConstraintSet build_constraints(const GridCase& grid, const LinearSystem& sys,
                                double gamma) {
  ConstraintSet set;
  set.gamma = gamma;
  set.kappa = kappa_from_gamma(gamma);
  const int ng = static_cast<int>(grid.generators.size());
  const int ns = sys.ns();
  auto add_pair = [&](const RowVector& phi, double bound, const std::string& label) {
    set.rows.push_back({phi, bound, label + "+"});
    set.rows.push_back({-phi, bound, label + "-"});
  };
  for (int i = 0; i < ng; ++i) {
    const auto& g = grid.generators[i];
    if (!std::isfinite(g.p_max)) continue;
    RowVector phi = RowVector::Zero(ns);
    phi(sys.u_offset() + i) = 1.0;
    phi(i) = -1.0 / g.R;
    add_pair(phi, g.p_max, "gen_" + std::to_string(g.bus));
  }
  for (std::size_t l = 0; l < grid.lines.size(); ++l) {
    const auto& line = grid.lines[l];
    if (!std::isfinite(line.p_max)) continue;
    RowVector phi = RowVector::Zero(ns);
    phi(ng + static_cast<Eigen::Index>(l)) = 1.0;
    add_pair(phi, line.p_max, "line_" + std::to_string(line.id));
  }
  if (std::isfinite(grid.freq_limit)) add_pair(sys.freq_row, grid.freq_limit, "freq");
  return set;
}

ConstraintSet build_constraints(const GridCase& grid, double gamma) {
  return build_constraints(grid, build_linear_system(grid), gamma);
}

}  // namespace itoagc
