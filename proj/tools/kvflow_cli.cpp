// kvflow command-line driver.
//
// Exit codes: 0 success, 1 failed property checks (verify), 2 configuration
// error, 3 numerical abort.

#include "kvflow/errors.hpp"
#include "kvflow/simulation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

kvflow::RunConfig load(const std::string& path, const std::string& output_dir) {
  std::vector<std::string> warnings;
  kvflow::RunConfig cfg = kvflow::load_config(path, &warnings);
  for (const std::string& w : warnings) warn(w);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw kvflow::ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

int report_sweep(const kvflow::SweepResult& r, const kvflow::RunConfig& cfg, const std::string& suffix,
                 const std::string& value_name, const std::string& metric_name) {
  const std::string table = kvflow::sweep_csv(r, value_name, metric_name);
  const auto path = std::filesystem::path(cfg.output_dir) / (cfg.name + suffix);
  write_text(path, table);
  std::cout << table;
  if (!r.complete) {
    std::cerr << "sweep aborted: " << r.error << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kelvin-Voigt visco-elastodynamics simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string output_dir;
  std::uint64_t seed = 12345;
  app.add_option("--output-dir", output_dir, "Override output.directory");
  app.add_option("--seed", seed, "Seed for randomised property checks");

  std::string config_path;
  std::vector<double> values;
  std::string mode;

  auto* run = app.add_subcommand("run", "Run a scenario and write CSV and snapshots");
  run->add_option("config", config_path, "Configuration file")->required();

  auto* sweep_k = app.add_subcommand("sweep-k", "Incompressible-limit sweep over the bulk modulus K");
  sweep_k->add_option("config", config_path, "Configuration file")->required();
  sweep_k->add_option("--values", values, "K values (geometric)");
  sweep_k->add_option("--mode", mode, "viscous or elastic");

  auto* sweep_eps = app.add_subcommand("sweep-eps", "Transport-regularisation sweep over eps");
  sweep_eps->add_option("config", config_path, "Configuration file")->required();
  sweep_eps->add_option("--values", values, "eps values (0 is the reference)");

  auto* verify = app.add_subcommand("verify", "Run the randomised property suite");
  verify->add_option("config", config_path, "Configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const kvflow::RunConfig cfg = load(config_path, output_dir);
    if (*run) {
      const kvflow::RunSummary s = kvflow::run_scenario(cfg, warn);
      std::cout << s.message << "\n" << "series: " << s.csv_path << "\n";
      if (s.exit_code != 0) std::cerr << s.message << '\n';
      return s.exit_code;
    }
    if (*sweep_k) {
      const std::vector<double> ks = values.empty() ? cfg.sweep_values : values;
      const auto m = kvflow::bulk_mode_from_string(mode.empty() ? cfg.sweep_mode : mode);
      const kvflow::SweepResult r = kvflow::sweep_incompressible_limit(cfg, ks, m);
      const int code = report_sweep(r, cfg, "_sweep_k.csv", "K", "div_v_L2");
      std::printf("slope %.6g\n", r.slope);
      return code;
    }
    if (*sweep_eps) {
      const std::vector<double> es = values.empty() ? cfg.sweep_values : values;
      const kvflow::SweepResult r = kvflow::sweep_epsilon(cfg, es);
      const int code = report_sweep(r, cfg, "_sweep_eps.csv", "eps", "F_distance_L2");
      std::cout << "strictly decreasing: " << (r.monotone ? "yes" : "no") << '\n';
      return code;
    }
    if (*verify) {
      const auto checks = kvflow::verify_properties(cfg, seed);
      bool ok = true;
      for (const auto& c : checks) {
        std::printf("%-48s %s  value %.3e  tol %.1e\n", c.name.c_str(), c.pass ? "PASS" : "FAIL", c.value,
                    c.tolerance);
        ok = ok && c.pass;
      }
      return ok ? kExitOk : kExitCheckFailed;
    }
  } catch (const kvflow::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const kvflow::ValidationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const kvflow::NumericalError& e) {
    std::cerr << "numerical abort at t = " << e.time() << ": " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
