#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nsmc/fields.hpp"

namespace nsmc {

/// Brownian sampling parameters for the pressure representations.
/// With antithetic sampling, n_paths counts individual paths, so
/// n_paths / 2 (rounded up) independent +/- pairs are drawn.
struct PoissonConfig {
  int n_paths = 8192;
  double dt_bm = 1e-3;
  double t_max = 20.0;
  std::uint64_t seed = 0;
  bool antithetic = true;

  void validate() const;
};

struct PressureEstimate {
  double value = 0.0;
  double std_err = 0.0;
  /// Contribution of the last 10% of [0, t_max] to the estimate.
  double tail = 0.0;
  /// Set when |tail| exceeds 10 standard errors.
  bool tail_warning = false;
};

struct GradPressureEstimate {
  Vec3 value = Vec3::Zero();
  Vec3 std_err = Vec3::Zero();
  Vec3 tail = Vec3::Zero();
  bool tail_warning = false;
};

/// p(x) for -Lap p = gamma(t, .):  p = 1/2 int_0^inf E gamma(x + B_tau) dtau.
///
/// The time integral is a left-endpoint sum with step dt_bm up to t_max.
/// All points in a batch share the same Brownian paths, so differences
/// between nearby points carry little noise. In whole space the truncated
/// remainder is added from the monopole expansion of gamma about its
/// centroid, M erf(r / sqrt(2 t_max)) / (4 pi r).
///
/// Periodic gamma must have zero mean; it is not checked here.
std::vector<PressureEstimate> pressure_mc(const ScalarField& gamma, double t, std::span<const Vec3> xs,
                                          const PoissonConfig& cfg, const Domain& domain = PeriodicCube{});
PressureEstimate pressure_mc(const ScalarField& gamma, double t, const Vec3& x, const PoissonConfig& cfg,
                             const Domain& domain = PeriodicCube{});

/// grad p(x) = 1/2 int_0^inf (1/tau) E[gamma(x + B_tau) B_tau] dtau. The first
/// cell [0, dt_bm) uses its small-tau limit 1/2 grad gamma(x) dt_bm.
std::vector<GradPressureEstimate> grad_pressure_mc(const ScalarField& gamma, double t, std::span<const Vec3> xs,
                                                   const PoissonConfig& cfg, const Domain& domain = PeriodicCube{});
GradPressureEstimate grad_pressure_mc(const ScalarField& gamma, double t, const Vec3& x, const PoissonConfig& cfg,
                                      const Domain& domain = PeriodicCube{});

/// Central difference (p(x + h e_k) - p(x - h e_k)) / 2h of pressure_mc
/// computed path by path, so the standard error is that of the quotient.
GradPressureEstimate grad_pressure_fd_mc(const ScalarField& gamma, double t, const Vec3& x, double h,
                                         const PoissonConfig& cfg, const Domain& domain = PeriodicCube{});

/// Deterministic product-quadrature resolution for the Newton potential.
struct QuadratureConfig {
  int radial_panels = 64;  // 20-point Gauss-Legendre per panel
  int polar_nodes = 32;    // Gauss-Legendre in cos(theta)
  int azimuth_nodes = 64;  // trapezoid in phi
};

/// (1/4 pi) int gamma(t, y) / |x - y| dy.
///
/// WholeSpace: spherical product quadrature centred at x out to
/// |x| + support_radius (gamma is assumed to vanish outside the support
/// ball about the origin). PeriodicCube: spectral solve of -Lap p = gamma
/// on the domain grid, evaluated at x through the trigonometric
/// interpolant; raises NoSolutionError when gamma has nonzero mean.
double newton_potential_quadrature(const ScalarField& gamma, double t, const Vec3& x, const Domain& domain,
                                   const QuadratureConfig& q = {});

/// Total mass and centroid of gamma(t, .) over the whole-space support ball.
struct MassMoments {
  double mass = 0.0;
  Vec3 centroid = Vec3::Zero();
};
MassMoments mass_moments(const ScalarField& gamma, double t, const WholeSpace& domain, const QuadratureConfig& q = {});

/// Spectral check of int |Hess N gamma|_F^2 = int gamma^2 on the periodic
/// grid. Both sides are Parseval sums over the full wavenumber set.
struct CalderonZygmund {
  double lhs = 0.0;
  double rhs = 0.0;
};
CalderonZygmund calderon_zygmund_check(const ScalarField& gamma, double t, const PeriodicCube& domain = {});

}  // namespace nsmc
