#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nsmc/apriori.hpp"
#include "nsmc/fields.hpp"
#include "nsmc/flows.hpp"
#include "nsmc/picard.hpp"
#include "nsmc/poisson.hpp"

namespace nsmc {

enum class Subcommand { Solve, Poisson, Parabolic, Apriori, Validate, Bench };

const char* to_string(Subcommand s);
Subcommand subcommand_from_string(const std::string& s);

/// Evaluation points: an explicit list, or `count` uniform draws in the
/// box [lo, hi)^3 from a generator seeded by the run seed.
struct PointSet {
  std::vector<Vec3> explicit_points;
  int count = 20;
  double lo = 0.0;
  double hi = 2.0 * std::numbers::pi;

  std::vector<Vec3> resolve(std::uint64_t seed) const;
};

struct PoissonRun {
  ScalarField gamma = ScalarField(CosineMode{});
  double t = 0.0;
  PointSet points;
  PoissonConfig mc;
  bool gradient = false;
};

struct ParabolicRun {
  VectorField drift = VectorField(ZeroVector{});
  ScalarField f0 = ScalarField(GaussianBump{});
  ScalarField source = ScalarField(ZeroScalar{});
  double t_start = 0.0;
  PointSet points;
  double dt = 1e-3;
  int n_paths = 4096;
};

struct AprioriRun {
  AprioriParams params{1.0, 1.0, 1.0, 1.0};
  double t = 0.1;
  double ds = 1e-3;
};

struct BenchRun {
  std::vector<int> n_paths{256, 1024, 4096};
  int n_points = 16;
};

/// Everything a run needs. The YAML text it was parsed from is kept so the
/// manifest can echo it verbatim.
struct RunConfig {
  Subcommand subcommand = Subcommand::Solve;
  NSProblem problem{VectorField(Beltrami{}), 1.0, 0.1, PeriodicCube{}};
  std::string field_family = "beltrami";
  PicardConfig solver;
  PoissonRun poisson;
  ParabolicRun parabolic;
  AprioriRun apriori;
  BenchRun bench;
  std::uint64_t seed = 0;
  std::filesystem::path output = "nsmc_out";
  std::string source_text;

  /// Range checks, problem validation for `solve`, and the tolerance
  /// check tol >= 3 * predicted_velocity_std_err.
  void validate() const;
};

/// Parses the YAML schema documented in README.md. Missing keys take their
/// defaults; unknown keys and malformed values raise ConfigError with the
/// line and column of the offending node. A given `subcommand` replaces the
/// one in the text before validation.
RunConfig parse_config(const std::string& text, std::optional<Subcommand> subcommand = std::nullopt);
RunConfig load_config(const std::filesystem::path& path, std::optional<Subcommand> subcommand = std::nullopt);

/// Complete YAML for `cfg` with every key spelled out, so that
/// parse_config(to_yaml(c)) reproduces c. Raises ConfigError for fields
/// without a textual form (custom callables, grid samples).
std::string to_yaml(const RunConfig& cfg);

/// Calibrated constant of the standard-error predictor (see `bench`).
inline constexpr double kStdErrConstant = 0.5;

/// Predicted sup standard error of the velocity at t_final:
///   k * sigma * sqrt(t_final) * sup|grad u0| / sqrt(n_paths)
/// with sup|grad u0| in the Frobenius norm over the solver grid.
double predicted_velocity_std_err(const NSProblem& prob, const PicardConfig& cfg, double k = kStdErrConstant);

}  // namespace nsmc
