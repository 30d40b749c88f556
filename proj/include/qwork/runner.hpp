#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qwork/analytic.hpp"
#include "qwork/dynamics.hpp"
#include "qwork/scenario.hpp"
#include "qwork/strong_coupling.hpp"
#include "qwork/work_stats.hpp"

namespace qwork {

// Full-space oracles (brute-force TPM, partition ratio, dephasing identities)
// are only run when the assembled dimension fits this budget.
inline constexpr Index kFullSpaceCheckBudget = 256;

// Time-ordered propagation cost scales as steps * dim^3; keep CLI schedule
// runs on small environments.
inline constexpr Index kScheduleEnvBudget = 64;

inline constexpr Index kDecoherenceEnvBudget = 256;

inline std::string format_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string scenario_hash(const json& canonical) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct RunOutcome {
  nlohmann::ordered_json report;
  std::vector<CheckResult> checks;
  std::vector<std::string> files;
  bool checks_passed = true;

  ThermoReport thermo;
  double jarzynski_global_residual = 0.0;
};

namespace run_detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output file " + path.string());
  out << content;
}

inline std::string distribution_csv(const WorkDistribution& d) {
  std::string csv = "w,probability\n";
  for (const auto& a : d.atoms) csv += format_g17(a.w) + "," + format_g17(a.p) + "\n";
  return csv;
}

inline std::string histogram_csv(const WorkDistribution& d, double width) {
  if (!(width > 0.0)) throw std::invalid_argument("bins: bin width must be positive");
  const double lo = std::floor(d.atoms.front().w / width) * width;
  const std::size_t count =
      static_cast<std::size_t>(std::floor((d.atoms.back().w - lo) / width)) + 1;
  std::vector<double> bins(count, 0.0);
  for (const auto& a : d.atoms) {
    std::size_t idx = static_cast<std::size_t>(std::floor((a.w - lo) / width));
    if (idx >= count) idx = count - 1;
    bins[idx] += a.p;
  }
  std::string csv = "bin_left,bin_right,probability\n";
  for (std::size_t i = 0; i < count; ++i)
    csv += format_g17(lo + i * width) + "," + format_g17(lo + (i + 1) * width) + "," +
           format_g17(bins[i]) + "\n";
  return csv;
}

inline CouplingSchedule make_schedule(const DephasingModel& m, const ScheduleSpec& spec,
                                      const TimeGrid& time) {
  if (spec.preset == "linear-ramp") return linear_ramp_schedule(m, time.total_time, time.steps);
  if (spec.preset == "quench-off")
    return quench_off_schedule(m, spec.t_off, time.total_time, time.steps);
  return constant_schedule(m, time.total_time, time.steps);
}

inline std::string decoherence_csv_static(const DephasingModel& m, const ThermalContext& ctx,
                                          const TimeGrid& time) {
  const auto rho_b = thermal_state(m.env_hamiltonian, ctx);
  const Index ds = m.system_dim();
  std::vector<SpectralDecomposition> blocks(ds);
  parallel_for(ds, [&](std::size_t n) { blocks[n] = eig_hermitian(m.block(n)); });

  std::string csv = "t";
  for (Index n = 0; n < ds; ++n)
    for (Index k = n + 1; k < ds; ++k)
      csv += ",gamma_" + std::to_string(n) + "_" + std::to_string(k);
  csv += "\n";
  for (int i = 0; i <= time.grid_points; ++i) {
    const double t = time.total_time * i / time.grid_points;
    csv += format_g17(t);
    std::vector<Matrix> props(ds);
    for (Index n = 0; n < ds; ++n) props[n] = blocks[n].propagator(t);
    for (Index n = 0; n < ds; ++n)
      for (Index k = n + 1; k < ds; ++k) {
        const double g = std::min(
            0.0, log_overlap_modulus((props[k].adjoint() * props[n] * rho_b.mat()).trace()));
        csv += "," + format_g17(g);
      }
    csv += "\n";
  }
  return csv;
}

inline std::string decoherence_csv_schedule(const DephasingModel& m, const ThermalContext& ctx,
                                            const CouplingSchedule& cs, const TimeGrid& time) {
  const auto env = eig_hermitian(m.env_hamiltonian);
  const auto rho_b = thermal_state(env, ctx);
  const Index ds = m.system_dim();
  std::vector<std::vector<Matrix>> paths(ds);
  parallel_for(ds, [&](std::size_t n) {
    paths[n] = time_ordered_V_grid(cs, env, static_cast<Index>(n), time.grid_points);
  });

  std::string csv = "t";
  for (Index n = 0; n < ds; ++n)
    for (Index k = n + 1; k < ds; ++k)
      csv += ",gamma_" + std::to_string(n) + "_" + std::to_string(k);
  csv += "\n";
  for (int i = 0; i <= time.grid_points; ++i) {
    csv += format_g17(cs.total_time * i / time.grid_points);
    for (Index n = 0; n < ds; ++n)
      for (Index k = n + 1; k < ds; ++k) {
        const double g =
            std::min(0.0, decoherence_from_propagators(paths[n][i], paths[k][i], rho_b));
        csv += "," + format_g17(g);
      }
    csv += "\n";
  }
  return csv;
}

inline void add_check(RunOutcome& out, const std::string& name, double residual, double tol) {
  const bool pass = residual <= tol;
  out.checks.push_back(CheckResult{name, residual, tol, pass});
  if (!pass) out.checks_passed = false;
}

}  // namespace run_detail

/// Executes one scenario: builds the model, selects the static, commuting, or
/// time-dependent route, evaluates the work statistics and identity checks,
/// and writes the requested artifact files under output_dir.
inline RunOutcome run_scenario(const Scenario& sc, const std::filesystem::path& output_dir,
                               const std::string& stem, std::optional<double> bins = {}) {
  using run_detail::add_check;
  const DephasingModel model = build_model(sc.model);
  const ThermalContext ctx(sc.beta);
  const RealVector pops = system_populations(model, ctx);
  const Index full_dim = model.system_dim() * model.env_dim();

  RunOutcome out;
  nlohmann::ordered_json& report = out.report;
  report["scenario"] = sc.raw;
  std::vector<std::string> not_applicable;

  const bool scheduled = sc.schedule && sc.schedule->preset != "constant";
  std::string route;
  BlockWorkSet bw;
  if (scheduled) {
    if (model.env_dim() > kScheduleEnvBudget)
      throw std::invalid_argument(
          "schedule: time-dependent runs are limited to environment dimension <= " +
          std::to_string(kScheduleEnvBudget));
    route = "time-dependent";
    const CouplingSchedule cs = run_detail::make_schedule(model, *sc.schedule, sc.time);
    bw = td_block_work_set(model.env_hamiltonian, cs, ctx);
  } else if (couplings_commute(model)) {
    route = "commuting-fast-path";
    bw = commuting_fast_path(model, ctx);
  } else {
    route = "generic-blocks";
    bw = block_work_set(model, ctx);
  }
  report["route"] = route;

  const WorkDistribution mix = work_distribution(bw, pops);
  out.thermo = bound_chain(bw, pops, ctx, sc.moment_order);
  const auto jb = jarzynski_block(bw, ctx);
  const auto jg = jarzynski_global(mix, bw, pops, ctx);
  out.jarzynski_global_residual = jg.residual;

  nlohmann::ordered_json results;
  results["mean_work"] = out.thermo.mean_work;
  results["work_moments"] = out.thermo.work_moments;
  results["exp_beta_work"] = out.thermo.exp_beta_work;
  results["delta_f"] = out.thermo.delta_f;
  results["intermediate_bound"] = out.thermo.intermediate_bound;
  results["irreversible_work"] = out.thermo.irreversible_work;
  results["gap_mean_vs_bound"] = out.thermo.gap_mean_vs_bound;
  results["gap_bound_vs_delta_f"] = out.thermo.gap_bound_vs_delta_f;
  results["atom_count"] = mix.atoms.size();

  double max_block_residual = 0.0;
  for (const auto& p : jb) max_block_residual = std::max(max_block_residual, p.residual);
  results["jarzynski_block_max_residual"] = max_block_residual;
  results["jarzynski_global_residual"] = jg.residual;

  add_check(out, "normalization", std::abs(mix.total_probability() - 1.0), 1e-10);
  add_check(out, "jarzynski-block", max_block_residual, sc.tolerances.jarzynski);
  add_check(out, "jarzynski-global", jg.residual, sc.tolerances.jarzynski);
  add_check(out, "bound-chain-slack",
            std::max(0.0, -std::min(out.thermo.gap_mean_vs_bound,
                                    out.thermo.gap_bound_vs_delta_f)),
            sc.tolerances.bound_slack);

  if (!scheduled && full_dim <= kFullSpaceCheckBudget) {
    const auto fs = jarzynski_full_space_check(model, ctx);
    results["full_space_residual"] = fs.residual;
    add_check(out, "full-space-partition-ratio", fs.residual, sc.tolerances.full_space);
  } else {
    not_applicable.push_back(scheduled
                                 ? "full-space-partition-ratio: static identity only"
                                 : "full-space-partition-ratio: dimension " +
                                       std::to_string(full_dim) + " exceeds check budget " +
                                       std::to_string(kFullSpaceCheckBudget));
  }

  std::filesystem::create_directories(output_dir);
  const std::string tag = stem + "-" + scenario_hash(sc.raw);

  if (sc.outputs.count(OutputKind::distribution)) {
    const auto path = output_dir / (tag + ".distribution.csv");
    run_detail::write_file(path, run_detail::distribution_csv(mix));
    out.files.push_back(path.string());
    report["files"]["distribution"] = path.filename().string();
    if (bins) {
      const auto hpath = output_dir / (tag + ".histogram.csv");
      run_detail::write_file(hpath, run_detail::histogram_csv(mix, *bins));
      out.files.push_back(hpath.string());
      report["files"]["histogram"] = hpath.filename().string();
    }
  }

  if (sc.outputs.count(OutputKind::decoherence)) {
    if (model.env_dim() > kDecoherenceEnvBudget) {
      not_applicable.push_back("decoherence: environment dimension " +
                               std::to_string(model.env_dim()) + " exceeds budget " +
                               std::to_string(kDecoherenceEnvBudget));
    } else {
      const std::string csv =
          scheduled ? run_detail::decoherence_csv_schedule(
                          model, ctx, run_detail::make_schedule(model, *sc.schedule, sc.time),
                          sc.time)
                    : run_detail::decoherence_csv_static(model, ctx, sc.time);
      const auto path = output_dir / (tag + ".decoherence.csv");
      run_detail::write_file(path, csv);
      out.files.push_back(path.string());
      report["files"]["decoherence"] = path.filename().string();
    }
  }

  if (sc.outputs.count(OutputKind::strong_coupling)) {
    if (full_dim > kFullSpaceCheckBudget) {
      not_applicable.push_back("strong-coupling: dimension " + std::to_string(full_dim) +
                               " exceeds check budget " +
                               std::to_string(kFullSpaceCheckBudget));
    } else {
      const double t_final = sc.time.total_time;
      const auto eff = effective_system_hamiltonian(model, ctx, t_final);
      const Matrix hs = model.system_energies.cast<Complex>().asDiagonal();
      const double deviation = max_abs(eff.h_star.mat() - hs);
      const double e0 = strong_coupling_internal_energy(model, ctx, 0.0);
      const double e_half = strong_coupling_internal_energy(model, ctx, 0.5 * t_final);
      const double e1 = strong_coupling_internal_energy(model, ctx, t_final);
      const double drift = std::max(std::abs(e_half - e0), std::abs(e1 - e0));
      results["strong_coupling"] = {{"h_star_deviation", deviation},
                                    {"internal_energy", e0},
                                    {"energy_time_drift", drift}};
      add_check(out, "strong-coupling-identity", deviation, sc.tolerances.h_star);
      add_check(out, "strong-coupling-energy-drift", drift, sc.tolerances.energy_time_drift);
    }
  }

  report["results"] = results;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : out.checks)
    checks.push_back({{"name", c.name},
                      {"residual", c.residual},
                      {"tolerance", c.tolerance},
                      {"pass", c.pass}});
  report["checks"] = checks;
  report["not_applicable"] = not_applicable;

  const auto rpath = output_dir / (tag + ".report.json");
  run_detail::write_file(rpath, report.dump(2) + "\n");
  out.files.push_back(rpath.string());
  return out;
}

struct SweepOutcome {
  std::vector<RunOutcome> points;
  std::string aggregate_path;
  bool checks_passed = true;
};

/// Expands the sweep section into one scenario per value, validates every
/// point before running any (fail fast), runs them in order, and writes the
/// aggregate table.
inline SweepOutcome sweep_scenario(const Scenario& sc, const std::filesystem::path& output_dir,
                                   const std::string& stem, std::optional<double> bins = {}) {
  if (!sc.sweep_parameter)
    throw std::invalid_argument("sweep: config has no sweep section");
  const json::json_pointer ptr{*sc.sweep_parameter};

  std::vector<Scenario> points;
  for (std::size_t i = 0; i < sc.sweep_values.size(); ++i) {
    json patched = sc.raw;
    if (!patched.contains(ptr))
      throw std::invalid_argument("sweep.parameter: path " + *sc.sweep_parameter +
                                  " not found in config");
    patched[ptr] = sc.sweep_values[i];
    try {
      points.push_back(parse_scenario(patched));
      build_model(points.back().model);  // surface builder errors before any run
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("sweep point " + std::to_string(i) + ": " + e.what());
    }
  }

  SweepOutcome out;
  std::string csv = "parameter,mean_work,intermediate_bound,gap,jarzynski_residual\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    RunOutcome r = run_scenario(points[i], output_dir,
                                stem + ".point" + std::to_string(i), bins);
    if (!r.checks_passed) out.checks_passed = false;
    csv += sc.sweep_values[i].dump() + "," + format_g17(r.thermo.mean_work) + "," +
           format_g17(r.thermo.intermediate_bound) + "," +
           format_g17(r.thermo.gap_mean_vs_bound) + "," +
           format_g17(r.jarzynski_global_residual) + "\n";
    out.points.push_back(std::move(r));
  }
  const auto apath = output_dir / (stem + "-" + scenario_hash(sc.raw) + ".sweep.csv");
  run_detail::write_file(apath, csv);
  out.aggregate_path = apath.string();
  return out;
}

/// Full invariant suite on one (small) configured model: oracle equivalence,
/// fluctuation identities, bound chain, dephasing invariants, the
/// strong-coupling identity, and the cyclic protocol. Returns one result per
/// named check.
inline std::vector<CheckResult> check_scenario(const Scenario& sc) {
  const DephasingModel model = build_model(sc.model);
  const ThermalContext ctx(sc.beta);
  const Index full_dim = model.system_dim() * model.env_dim();
  if (full_dim > kFullSpaceCheckBudget)
    throw std::invalid_argument(
        "check: model dimension " + std::to_string(full_dim) + " exceeds the " +
        std::to_string(kFullSpaceCheckBudget) +
        " budget for full-space oracles; configure a smaller model");

  std::vector<CheckResult> checks;
  const auto add = [&checks](const std::string& name, double residual, double tol) {
    checks.push_back(CheckResult{name, residual, tol, residual <= tol});
  };

  const RealVector pops = system_populations(model, ctx);
  const BlockWorkSet bw = block_work_set(model, ctx);
  const WorkDistribution mix = work_distribution(bw, pops);

  const auto [h0, h] = assemble_total_hamiltonians(model);
  const WorkDistribution oracle = brute_force_tpm(h0, h, ctx);
  add("oracle-equivalence", atomwise_distance(mix, oracle), sc.tolerances.oracle);

  double max_block = 0.0;
  for (const auto& p : jarzynski_block(bw, ctx)) max_block = std::max(max_block, p.residual);
  add("jarzynski-block", max_block, sc.tolerances.jarzynski);
  add("jarzynski-global", jarzynski_global(mix, bw, pops, ctx).residual,
      sc.tolerances.jarzynski);
  add("full-space-partition-ratio", jarzynski_full_space_check(model, ctx).residual,
      sc.tolerances.full_space);

  const ThermoReport rep = bound_chain(bw, pops, ctx, sc.moment_order);
  add("bound-chain-slack",
      std::max(0.0, -std::min(rep.gap_mean_vs_bound, rep.gap_bound_vs_delta_f)),
      sc.tolerances.bound_slack);

  const std::vector<double> times{0.5, 1.1, 1.9, 3.1, 4.7};
  double worst_de = 0.0, worst_drift = 0.0;
  for (double t : times) {
    const auto inv = system_energy_invariance(model, ctx, t);
    worst_de = std::max(worst_de, std::abs(inv.delta_e_s));
    worst_drift = std::max(worst_drift, inv.max_population_drift);
  }
  add("system-energy-invariance", worst_de, sc.tolerances.energy_invariance);
  add("population-drift", worst_drift, sc.tolerances.population_drift);

  const auto eff = effective_system_hamiltonian(model, ctx, 1.7);
  const Matrix hs = model.system_energies.cast<Complex>().asDiagonal();
  add("strong-coupling-identity", max_abs(eff.h_star.mat() - hs), sc.tolerances.h_star);
  const double e0 = strong_coupling_internal_energy(model, ctx, 0.0);
  double drift = 0.0;
  for (double t : {1.0, 3.0})
    drift = std::max(drift, std::abs(strong_coupling_internal_energy(model, ctx, t) - e0));
  add("strong-coupling-energy-drift", drift, sc.tolerances.energy_time_drift);

  double worst_neg = 0.0, worst_env = 0.0;
  const Matrix rho0 = thermal_state(h0, ctx).mat();
  const auto full = eig_hermitian(h);
  Matrix env_full = Matrix::Zero(full_dim, full_dim);
  for (Index n = 0; n < model.system_dim(); ++n)
    env_full.block(n * model.env_dim(), n * model.env_dim(), model.env_dim(), model.env_dim()) =
        model.env_hamiltonian.mat();
  for (double t : times) {
    const double w_tot = cyclic_switchoff_work(model, ctx, t);
    worst_neg = std::max(worst_neg, std::max(0.0, -w_tot));
    const Matrix u = full.propagator(t);
    const Matrix rho_t = u * rho0 * u.adjoint();
    const double env_change = (env_full * (rho_t - rho0)).trace().real();
    worst_env = std::max(worst_env, std::abs(w_tot - env_change));
  }
  add("cyclic-work-nonnegative", worst_neg, sc.tolerances.cyclic);
  add("cyclic-environment-energy", worst_env, sc.tolerances.cyclic_env);

  return checks;
}

}  // namespace qwork
