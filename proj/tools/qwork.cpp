// qwork: exact work statistics of quenches that switch on a pure-dephasing
// system-environment interaction. Subcommands:
//   run    one scenario -> report + distribution/decoherence files
//   sweep  one scenario per sweep value -> per-point reports + aggregate CSV
//   check  invariant suite (oracle equivalence, fluctuation identities,
//          bound chain, dephasing and cyclic identities) on a small model
// Exit codes: 0 success, 2 configuration/validation error, 3 failed check.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qwork/runner.hpp"

namespace {

qwork::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  return qwork::json::parse(in);
}

std::string stem_of(const std::string& path) {
  const std::string s = std::filesystem::path(path).stem().string();
  return s.empty() ? "scenario" : s;
}

void print_checks(const std::vector<qwork::CheckResult>& checks) {
  for (const auto& c : checks)
    std::printf("check %-32s residual %-12.3e tolerance %-9.0e %s\n", c.name.c_str(), c.residual,
                c.tolerance, c.pass ? "PASS" : "FAIL");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qwork: work statistics of pure-dephasing quenches"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir = ".";
  double bin_width = 0.0;

  const auto add_common = [&](CLI::App* cmd, bool with_bins) {
    cmd->add_option("--config", config_path, "scenario configuration (JSON)")->required();
    cmd->add_option("--output-dir", output_dir, "directory for artifact files");
    if (with_bins)
      cmd->add_option("--bins", bin_width,
                      "histogram bin width for the distribution output (optional)");
  };

  CLI::App* cmd_run = app.add_subcommand("run", "run one scenario");
  add_common(cmd_run, true);
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "run a parameter sweep");
  add_common(cmd_sweep, true);
  CLI::App* cmd_check = app.add_subcommand("check", "run the invariant suite");
  add_common(cmd_check, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto t_start = std::chrono::steady_clock::now();
    const qwork::Scenario sc = qwork::parse_scenario(load_config(config_path));
    const std::string stem = stem_of(config_path);
    std::optional<double> bins;
    if (bin_width > 0.0) bins.emplace(bin_width);
    int status = 0;

    if (cmd_run->parsed()) {
      const auto outcome = qwork::run_scenario(sc, output_dir, stem, bins);
      std::printf("route            %s\n",
                  outcome.report.at("route").get<std::string>().c_str());
      std::printf("mean work        %.12g\n", outcome.thermo.mean_work);
      std::printf("intermediate     %.12g\n", outcome.thermo.intermediate_bound);
      std::printf("delta F          %.12g\n", outcome.thermo.delta_f);
      std::printf("irreversible     %.12g\n", outcome.thermo.irreversible_work);
      print_checks(outcome.checks);
      for (const auto& f : outcome.files) std::printf("wrote %s\n", f.c_str());
      status = outcome.checks_passed ? 0 : 3;
    } else if (cmd_sweep->parsed()) {
      const auto outcome = qwork::sweep_scenario(sc, output_dir, stem, bins);
      std::printf("%-12s %-22s %-22s %-22s %s\n", "parameter", "mean_work",
                  "intermediate_bound", "gap", "jarzynski_residual");
      for (std::size_t i = 0; i < outcome.points.size(); ++i) {
        const auto& p = outcome.points[i];
        std::printf("%-12s %-22.15g %-22.15g %-22.15g %.3e\n",
                    sc.sweep_values[i].dump().c_str(), p.thermo.mean_work,
                    p.thermo.intermediate_bound, p.thermo.gap_mean_vs_bound,
                    p.jarzynski_global_residual);
      }
      std::printf("wrote %s\n", outcome.aggregate_path.c_str());
      status = outcome.checks_passed ? 0 : 3;
    } else {
      const auto checks = qwork::check_scenario(sc);
      print_checks(checks);
      for (const auto& c : checks)
        if (!c.pass) status = 3;
    }

    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t_start;
    std::printf("wall time %.3f s\n", elapsed.count());
    return status;
  } catch (const qwork::json::exception& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const qwork::invariant_violation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
