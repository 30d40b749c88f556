#pragma once

#include <json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qwork/models.hpp"
#include "qwork/operators.hpp"

namespace qwork {

using nlohmann::json;

// Scenario configuration: one JSON document describing a model, the inverse
// temperature, the requested outputs, and optional schedule/sweep sections.
// Validation failures throw std::invalid_argument naming the field.

struct Tolerances {
  double jarzynski = 1e-9;
  double bound_slack = 1e-9;
  double oracle = 1e-9;
  double full_space = 1e-9;
  double energy_invariance = 1e-10;
  double population_drift = 1e-10;
  double h_star = 1e-9;
  double energy_time_drift = 1e-6;
  double cyclic = 1e-9;
  double cyclic_env = 1e-10;
};

struct TimeGrid {
  double total_time = 1.0;
  int steps = 1024;      // midpoint steps for time-ordered propagators
  int grid_points = 64;  // sampling resolution of time-resolved outputs
};

struct ScheduleSpec {
  std::string preset;  // "constant" | "linear-ramp" | "quench-off"
  double t_off = 0.0;  // switch-off time for "quench-off"
};

struct ModelConfig {
  enum class Type { qubit_boson, qubit_fermion, generic };
  Type type = Type::generic;

  // qubit system (both qubit-* types)
  double omega = 0.0;

  // qubit-boson
  std::vector<double> mode_frequencies;
  std::vector<double> mode_couplings;
  std::vector<int> fock_cutoffs;

  // qubit-fermion
  double hopping = 0.0;
  double chemical_potential = 0.0;
  int sites = 0;
  std::vector<double> site_couplings;  // empty when `coupling` is homogeneous
  double coupling = 0.0;
  bool scale_coupling_by_sites = false;
  Boundary boundary = Boundary::periodic;

  // generic-matrices
  RealVector system_energies;
  Matrix env_hamiltonian;
  std::vector<Matrix> couplings;
};

enum class OutputKind { distribution, moments, jarzynski, bounds, decoherence, strong_coupling };

struct Scenario {
  double beta = 1.0;
  ModelConfig model;
  std::set<OutputKind> outputs;
  int moment_order = 2;
  TimeGrid time;
  std::optional<ScheduleSpec> schedule;
  std::optional<std::string> sweep_parameter;  // JSON pointer
  std::vector<json> sweep_values;
  Tolerances tolerances;
  json raw;  // canonical echo of the parsed document
};

namespace config_detail {

[[noreturn]] inline void fail(const std::string& field, const std::string& what) {
  throw std::invalid_argument(field + ": " + what);
}

inline const json& require(const json& j, const std::string& scope, const char* key) {
  if (!j.contains(key)) fail(scope + "." + key, "missing required field");
  return j.at(key);
}

inline double require_finite(const json& j, const std::string& scope, const char* key) {
  const json& v = require(j, scope, key);
  if (!v.is_number()) fail(scope + "." + key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(scope + "." + key, "must be finite");
  return x;
}

inline int require_int(const json& j, const std::string& scope, const char* key) {
  const json& v = require(j, scope, key);
  if (!v.is_number_integer()) fail(scope + "." + key, "expected an integer");
  return v.get<int>();
}

inline std::vector<double> number_list(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) fail(field, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(field, "expected a non-empty array of numbers");
    const double x = e.get<double>();
    if (!std::isfinite(x)) fail(field, "entries must be finite");
    out.push_back(x);
  }
  return out;
}

// Row-major complex matrix given as an array of [re, im] pairs.
inline Matrix parse_matrix(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) fail(field, "expected an array of [re, im] pairs");
  const auto len = v.size();
  Index dim = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(len))));
  if (dim * dim != static_cast<Index>(len))
    fail(field, "length is not a perfect square (row-major d x d expected)");
  Matrix m(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) {
      const auto& e = v[static_cast<std::size_t>(i * dim + j)];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        fail(field, "entries must be [re, im] pairs");
      m(i, j) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  if (hermiticity_defect(m) > kHermitianTol)
    fail(field, "matrix fails the Hermiticity check (defect " +
                    std::to_string(hermiticity_defect(m)) + ")");
  return m;
}

inline ModelConfig parse_model(const json& j) {
  if (!j.is_object()) fail("model", "expected an object");
  ModelConfig mc;
  const std::string type = require(j, "model", "type").get<std::string>();
  if (type == "qubit-boson") {
    mc.type = ModelConfig::Type::qubit_boson;
    mc.omega = require_finite(j, "model", "omega");
    mc.mode_frequencies = number_list(require(j, "model", "mode_frequencies"),
                                      "model.mode_frequencies");
    mc.mode_couplings = number_list(require(j, "model", "couplings"), "model.couplings");
    const json& cut = require(j, "model", "fock_cutoffs");
    if (cut.is_number_integer()) {
      mc.fock_cutoffs.assign(mc.mode_frequencies.size(), cut.get<int>());
    } else if (cut.is_array()) {
      for (const auto& e : cut) {
        if (!e.is_number_integer()) fail("model.fock_cutoffs", "expected integers");
        mc.fock_cutoffs.push_back(e.get<int>());
      }
    } else {
      fail("model.fock_cutoffs", "expected an integer or an integer array");
    }
    for (double w : mc.mode_frequencies)
      if (!(w > 0.0)) fail("model.mode_frequencies", "frequencies must be positive");
    if (mc.mode_couplings.size() != mc.mode_frequencies.size())
      fail("model.couplings", "one coupling per mode required");
    if (mc.fock_cutoffs.size() != mc.mode_frequencies.size())
      fail("model.fock_cutoffs", "one cutoff per mode required");
    for (int c : mc.fock_cutoffs)
      if (c < 1) fail("model.fock_cutoffs", "cutoffs must be >= 1");
  } else if (type == "qubit-fermion") {
    mc.type = ModelConfig::Type::qubit_fermion;
    mc.omega = require_finite(j, "model", "omega");
    mc.hopping = require_finite(j, "model", "hopping");
    mc.chemical_potential = require_finite(j, "model", "chemical_potential");
    mc.sites = require_int(j, "model", "sites");
    if (mc.sites < 2 || mc.sites > 12) fail("model.sites", "need 2 <= sites <= 12");
    if (j.contains("site_couplings")) {
      mc.site_couplings = number_list(j.at("site_couplings"), "model.site_couplings");
      if (static_cast<int>(mc.site_couplings.size()) != mc.sites)
        fail("model.site_couplings", "one coupling per site required");
    } else {
      mc.coupling = require_finite(j, "model", "coupling");
      if (j.contains("scale_coupling_by_sites")) {
        if (!j.at("scale_coupling_by_sites").is_boolean())
          fail("model.scale_coupling_by_sites", "expected a boolean");
        mc.scale_coupling_by_sites = j.at("scale_coupling_by_sites").get<bool>();
      }
    }
    if (j.contains("boundary")) {
      const std::string b = j.at("boundary").get<std::string>();
      if (b == "periodic")
        mc.boundary = Boundary::periodic;
      else if (b == "open")
        mc.boundary = Boundary::open;
      else
        fail("model.boundary", "expected \"periodic\" or \"open\"");
    }
  } else if (type == "generic-matrices") {
    mc.type = ModelConfig::Type::generic;
    const auto energies = number_list(require(j, "model", "system_energies"),
                                      "model.system_energies");
    mc.system_energies = Eigen::Map<const RealVector>(energies.data(),
                                                      static_cast<Index>(energies.size()));
    mc.env_hamiltonian = parse_matrix(require(j, "model", "env_hamiltonian"),
                                      "model.env_hamiltonian");
    const json& cpl = require(j, "model", "couplings");
    if (!cpl.is_array() || cpl.empty()) fail("model.couplings", "expected an array of matrices");
    for (std::size_t n = 0; n < cpl.size(); ++n)
      mc.couplings.push_back(
          parse_matrix(cpl[n], "model.couplings[" + std::to_string(n) + "]"));
    if (mc.couplings.size() != static_cast<std::size_t>(mc.system_energies.size()))
      fail("model.couplings", "one coupling matrix per system level required");
    for (const auto& c : mc.couplings)
      if (c.rows() != mc.env_hamiltonian.rows())
        fail("model.couplings", "coupling dimension differs from env_hamiltonian");
  } else {
    fail("model.type", "expected qubit-boson, qubit-fermion, or generic-matrices");
  }
  return mc;
}

inline OutputKind parse_output(const std::string& s) {
  if (s == "distribution") return OutputKind::distribution;
  if (s == "moments") return OutputKind::moments;
  if (s == "jarzynski") return OutputKind::jarzynski;
  if (s == "bounds") return OutputKind::bounds;
  if (s == "decoherence") return OutputKind::decoherence;
  if (s == "strong-coupling") return OutputKind::strong_coupling;
  fail("outputs", "unknown output \"" + s + "\"");
}

}  // namespace config_detail

inline Scenario parse_scenario(const json& j) {
  using namespace config_detail;
  if (!j.is_object()) fail("config", "expected a JSON object");
  Scenario sc;
  sc.raw = j;

  sc.beta = require_finite(j, "config", "beta");
  if (!(sc.beta >= 1e-8)) fail("beta", "must be >= 1e-8 (finite-temperature engine)");

  sc.model = parse_model(require(j, "config", "model"));

  if (j.contains("outputs")) {
    const json& outs = j.at("outputs");
    if (!outs.is_array() || outs.empty()) fail("outputs", "expected a non-empty array");
    for (const auto& e : outs) {
      const std::string s = e.get<std::string>();
      if (s == "all") {
        sc.outputs = {OutputKind::distribution, OutputKind::moments, OutputKind::jarzynski,
                      OutputKind::bounds, OutputKind::decoherence, OutputKind::strong_coupling};
      } else {
        sc.outputs.insert(parse_output(s));
      }
    }
  } else {
    sc.outputs = {OutputKind::distribution, OutputKind::moments, OutputKind::jarzynski,
                  OutputKind::bounds};
  }

  if (j.contains("moment_order")) {
    sc.moment_order = require_int(j, "config", "moment_order");
    if (sc.moment_order < 1 || sc.moment_order > 6)
      fail("moment_order", "must be between 1 and 6");
  }

  if (j.contains("time")) {
    const json& t = j.at("time");
    sc.time.total_time = require_finite(t, "time", "T");
    if (!(sc.time.total_time > 0.0)) fail("time.T", "must be positive");
    if (t.contains("steps")) {
      sc.time.steps = require_int(t, "time", "steps");
      if (sc.time.steps < 1) fail("time.steps", "must be >= 1");
    }
    if (t.contains("grid_points")) {
      sc.time.grid_points = require_int(t, "time", "grid_points");
      if (sc.time.grid_points < 1 || sc.time.grid_points > 4096)
        fail("time.grid_points", "must be between 1 and 4096");
    }
  }

  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    ScheduleSpec spec;
    spec.preset = require(s, "schedule", "preset").get<std::string>();
    if (spec.preset != "constant" && spec.preset != "linear-ramp" &&
        spec.preset != "quench-off")
      fail("schedule.preset", "expected constant, linear-ramp, or quench-off");
    if (spec.preset == "quench-off") {
      spec.t_off = require_finite(s, "schedule", "t_off");
      if (!(spec.t_off >= 0.0 && spec.t_off <= sc.time.total_time))
        fail("schedule.t_off", "must lie within [0, time.T]");
    }
    sc.schedule = spec;
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    sc.sweep_parameter = require(s, "sweep", "parameter").get<std::string>();
    const json& values = require(s, "sweep", "values");
    if (!values.is_array() || values.empty())
      fail("sweep.values", "expected a non-empty array");
    for (const auto& v : values) sc.sweep_values.push_back(v);
  }

  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    const auto get = [&](const char* key, double& slot) {
      if (t.contains(key)) {
        slot = t.at(key).get<double>();
        if (!(slot > 0.0)) fail(std::string("tolerances.") + key, "must be positive");
      }
    };
    get("jarzynski", sc.tolerances.jarzynski);
    get("bound_slack", sc.tolerances.bound_slack);
    get("oracle", sc.tolerances.oracle);
    get("full_space", sc.tolerances.full_space);
    get("energy_invariance", sc.tolerances.energy_invariance);
    get("population_drift", sc.tolerances.population_drift);
    get("h_star", sc.tolerances.h_star);
    get("energy_time_drift", sc.tolerances.energy_time_drift);
    get("cyclic", sc.tolerances.cyclic);
    get("cyclic_env", sc.tolerances.cyclic_env);
  }
  return sc;
}

/// Materializes the configured model. Builder errors (budget, Hermiticity)
/// surface as std::invalid_argument.
inline DephasingModel build_model(const ModelConfig& mc) {
  switch (mc.type) {
    case ModelConfig::Type::qubit_boson: {
      const BosonBathSpec spec{mc.mode_frequencies, mc.mode_couplings, mc.fock_cutoffs};
      const BathOperators bath = build_boson_bath(spec);
      return build_qubit_model(QubitSpec{mc.omega}, bath.hamiltonian, bath.coupling);
    }
    case ModelConfig::Type::qubit_fermion: {
      std::vector<double> gs = mc.site_couplings;
      if (gs.empty()) {
        const double g =
            mc.scale_coupling_by_sites ? mc.coupling / mc.sites : mc.coupling;
        gs.assign(mc.sites, g);
      }
      const FermionBathSpec spec{mc.hopping, mc.chemical_potential, mc.sites, gs, mc.boundary};
      const BathOperators bath = build_fermion_bath(spec);
      return build_qubit_model(QubitSpec{mc.omega}, bath.hamiltonian, bath.coupling);
    }
    case ModelConfig::Type::generic: {
      std::vector<HermitianOperator> couplings;
      for (const auto& c : mc.couplings) couplings.push_back(HermitianOperator(c));
      return DephasingModel(mc.system_energies, HermitianOperator(mc.env_hamiltonian),
                            std::move(couplings));
    }
  }
  throw std::invalid_argument("model.type: unknown model type");
}

}  // namespace qwork
