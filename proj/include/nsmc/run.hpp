#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nsmc/config.hpp"
#include "nsmc/picard.hpp"

namespace nsmc {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitNotConverged = 2, kExitValidation = 3 };

/// Solve run with its diagnostics. rel_sup_error compares u(t_final) with
/// the exact solution when the initial field has one (Beltrami, Taylor-Green)
/// and is NaN otherwise.
struct SolveReport {
  PicardResult result;
  WeakSolutionReport weak;
  std::vector<double> rel_sup_error;  // per time node
  double bias = 0.0;
  double max_std_err = 0.0;
  bool kappa_decreasing = false;
};

/// Runs picard_run and writes the solve artifacts to `dir`:
///   deltas.csv    k,l,m,rho,zeta,kappa,inner_iterations,inner_residual,max_u_std_err,max_gamma_mean,div_ratio
///   norms.csv     t,K1,beta
///   velocity.csv  t,ix,iy,iz,ux,uy,uz (all time nodes)
///   slice.csv     ix,iy,x,y,ux,uy,uz,p at z index 0 and t_final
///   weak.csv      field,residual,std_err,budget,within_budget
///   velocity.bin, velocity_std_err.bin, pressure.bin in the grid binary format
/// The manifest is written by run().
SolveReport solve_and_write(const RunConfig& cfg, const std::filesystem::path& dir);

/// Dispatches on cfg.subcommand, writes artifacts and manifest.json into
/// cfg.output and returns the process exit code. Errors are caught, recorded
/// in a partial manifest and mapped to exit codes: ConfigError to 3, other
/// failures to 1. A solve that does not converge returns 2; a validate run
/// with a failing criterion returns 3.
int run(const RunConfig& cfg);

/// The built-in Beltrami solve used by the acceptance suite.
RunConfig beltrami_reference_config();

}  // namespace nsmc
