// Command-line driver: `fockstab run` and `fockstab compare`.
//
// Configuration comes from an optional JSON file (--config) with per-field
// flag overrides; flags win. Output directory falls back to
// $FOCKSTAB_OUTPUT_DIR, then to the working directory.
//
// Exit codes: 0 success, 1 config error, 2 runtime/numerical error, 3 I/O error.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fockstab/config.hpp"
#include "fockstab/experiment.hpp"

namespace {

struct Overrides {
  std::string config_file;
  std::optional<int> n_bar, system_dim, filter_dim, horizon, trajectories;
  std::optional<double> theta, phi, alpha_bar, delta, fd_step;
  std::optional<std::string> preset, law, output_dir;
  std::optional<std::uint64_t> master_seed;
  bool csv = false;
  unsigned workers = fockstab::default_workers();
};

void add_config_options(CLI::App& cmd, Overrides& o) {
  cmd.add_option("--config", o.config_file, "JSON config file")->check(CLI::ExistingFile);
  cmd.add_option("--n-bar", o.n_bar, "target photon number");
  cmd.add_option("--system-dim", o.system_dim, "truncation of the simulated cavity");
  cmd.add_option("--filter-dim", o.filter_dim, "truncation of the quantum filter");
  cmd.add_option("--theta", o.theta, "measurement phase offset (rad)");
  cmd.add_option("--phi", o.phi, "measurement phase per photon (rad)");
  cmd.add_option("--preset", o.preset, "measurement preset (paper-fig2)");
  cmd.add_option("--alpha-bar", o.alpha_bar, "control bound");
  cmd.add_option("--delta", o.delta, "Lyapunov measurement weight");
  cmd.add_option("--fd-step", o.fd_step, "finite-difference step of the quadratic fit");
  cmd.add_option("--law", o.law, "feedback law: lyapunov | finite-dim");
  cmd.add_option("--horizon", o.horizon, "steps per trajectory");
  cmd.add_option("--trajectories", o.trajectories, "ensemble size");
  cmd.add_option("--seed", o.master_seed, "master seed");
  cmd.add_option("--output-dir", o.output_dir, "directory for output files");
  cmd.add_flag("--csv", o.csv, "also write records.csv");
  cmd.add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
}

nlohmann::json resolve_raw_config(const Overrides& o) {
  nlohmann::json raw = nlohmann::json::object();
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    try {
      raw = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw fockstab::ConfigError("--config", e.what());
    }
  }
  auto set = [&](const char* key, const auto& value) {
    if (value) raw[key] = *value;
  };
  set("n_bar", o.n_bar);
  set("system_dim", o.system_dim);
  set("filter_dim", o.filter_dim);
  set("alpha_bar", o.alpha_bar);
  set("delta", o.delta);
  set("fd_step", o.fd_step);
  set("law", o.law);
  set("horizon", o.horizon);
  set("trajectories", o.trajectories);
  set("master_seed", o.master_seed);
  set("output_dir", o.output_dir);
  set("theta", o.theta);
  set("phi", o.phi);
  // Explicit angles replace a preset unless one is named on the command line too.
  if ((o.theta || o.phi) && !o.preset) raw["preset"] = nullptr;
  set("preset", o.preset);
  if (o.csv) raw["csv"] = true;
  if (!raw.contains("output_dir")) {
    if (const char* env = std::getenv("FOCKSTAB_OUTPUT_DIR"); env && *env) raw["output_dir"] = env;
  }
  return raw;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fock-state stabilization by QND measurement and Lyapunov feedback"};
  app.require_subcommand(1);

  Overrides run_opts;
  CLI::App* run = app.add_subcommand("run", "run one feedback law over an ensemble");
  add_config_options(*run, run_opts);

  Overrides compare_opts;
  CLI::App* compare =
      app.add_subcommand("compare", "run both feedback laws with the same seed");
  add_config_options(*compare, compare_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fockstab::kExitConfigError;
  }

  const Overrides& opts = run->parsed() ? run_opts : compare_opts;
  fockstab::ExperimentConfig config;
  try {
    config = fockstab::validate_config(resolve_raw_config(opts));
  } catch (const fockstab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return fockstab::kExitConfigError;
  }

  fockstab::RunOptions options{opts.workers, &std::cout, &std::cerr};
  return run->parsed() ? fockstab::cmd_run(config, options)
                       : fockstab::cmd_compare(config, options);
}
