#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "nsmc/config.hpp"
#include "nsmc/errors.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/run.hpp"

int main(int argc, char** argv) {
  using namespace nsmc;
  CLI::App app{"Monte Carlo solvers for the incompressible Navier-Stokes equations"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  app.add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed overriding the config");
  app.add_option("--threads", threads, "Worker threads (default: NSMC_THREADS or logical cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Output directory overriding the config");

  const std::pair<const char*, const char*> subs[] = {
      {"solve", "Picard iteration for the Navier-Stokes problem"},
      {"poisson", "Monte Carlo pressure (and gradient) at points"},
      {"parabolic", "Monte Carlo solution of a linear parabolic problem"},
      {"apriori", "Bound ODEs and existence horizon"},
      {"validate", "Acceptance suite with a pass/fail table"},
      {"bench", "Standard-error calibration of the velocity estimator"},
  };
  for (const auto& [name, help] : subs) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    const auto sub = subcommand_from_string(app.get_subcommands().front()->get_name());
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config(config_path, sub);
    } else {
      cfg = parse_config("", sub);
    }
    if (seed) cfg.seed = *seed;
    if (!out.empty()) cfg.output = out;
    if (threads) set_thread_count(*threads);
    return run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
