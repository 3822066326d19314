#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsmc/fields.hpp"

namespace nsmc {

/// du/dt = nu Lap u - (u . grad) u - grad p, div u = 0, u(0) = u0, with
/// nu = sigma^2 / 2. Only the periodic cube is supported by the solver.
struct NSProblem {
  VectorField u0;
  double sigma = 1.0;
  double t_final = 0.1;
  Domain domain = PeriodicCube{};

  double viscosity() const { return 0.5 * sigma * sigma; }

  /// Checks sigma, t_final, the domain, finiteness of u0 and
  /// sup |div u0| <= 1e-6 on the grid of `grid_n` nodes.
  void validate(int grid_n) const;
};

enum class Backend { PaperPicard, ConstantinIyer };

const char* to_string(Backend b);
Backend backend_from_string(const std::string& s);

struct PicardConfig {
  int time_grid_n = 3;
  int grid_n = 16;
  int n_paths = 4096;
  double dt = 5e-3;
  double tol = 5e-2;
  int k_max = 10;
  double inner_tol = 1e-3;
  int inner_max = 50;
  std::uint64_t seed = 0;
  Backend backend = Backend::PaperPicard;
  /// +/- Brownian pairs; n_paths counts paths, so n_paths / 2 pairs.
  bool antithetic = true;
  /// Exponents of the local norms entering the deltas (1 < q < 3/2 < 3 < m).
  double q = 1.2;
  double m = 4.0;

  void validate() const;
};

/// Per-iteration distances between successive iterates, all maxima over
/// the time grid. With S = |u^{k+1} - u^k| and n = |grad u^{k+1} - grad u^k|
/// (Frobenius): l = sup S, m = ||S||_q, rho = sup n, zeta = ||n||_m and
/// kappa = rho + zeta + m. L^r norms are cube averages (|f|^r mean)^(1/r).
struct IterationRecord {
  int k = 0;  // index of the new iterate
  double l = 0.0;
  double m = 0.0;
  double rho = 0.0;
  double zeta = 0.0;
  double kappa = 0.0;
  int inner_iterations = 0;  // summed over time nodes
  double inner_residual = 0.0;
  double max_u_std_err = 0.0;
  double max_gamma_mean = 0.0;  // discarded mean of gamma before the Poisson solve
  double div_ratio = 0.0;       // ||div u||_2 / ||grad u||_2 at t_final
};

/// Iterate k on the common time grid. grad_u is entry (i, j) = d u_i / d x_j
/// stored row-major. std_err fields are Monte Carlo standard errors of the
/// last step (zero for the initial iterate and in Euler mode).
struct PicardState {
  int k = 1;
  PeriodicGrid grid;
  std::vector<double> times;
  GridSeries<3> u;
  GridSeries<3> u_std_err;
  GridSeries<9> grad_u;
  GridSeries<9> grad_u_std_err;
  GridSeries<1> p;
  GridSeries<3> grad_p;
  GridSeries<9> hess_p;
  GridSeries<1> gamma;
  std::vector<IterationRecord> history;
  /// Norm trajectories per time node: K1 = sup |grad u|, beta = ||grad u||_q + ||grad u||_m.
  std::vector<double> K1;
  std::vector<double> beta;

  VectorField velocity() const { return VectorField(u); }
};

/// u^1 = u0 at every time node, grad u^1 = grad u0, p^1 = 0.
PicardState picard_init(const NSProblem& prob, const PicardConfig& cfg);

/// One outer iteration. Time nodes are processed in increasing order. For
/// node t_j the backward flow under drift u^k is simulated from every grid
/// node; the pressure integral uses trapezoid weights on the time nodes,
/// so only its endpoint (grad p and Hess p at (t_j, x), the tau -> t limit
/// of the Bismut-Elworthy-Li term) involves p^{k+1}(t_j). The inner
/// coupling gamma -> p -> grad u -> gamma is then iterated on the grid from
/// gamma = Tr[grad u^k grad u^k] until the sup change is below inner_tol.
/// Raises InnerDivergenceError after inner_max iterations.
///
/// Noise streams are keyed by (seed, time node, grid node, path) and not
/// by k, so successive iterates share common random numbers.
PicardState picard_step(const PicardState& state, const NSProblem& prob, const PicardConfig& cfg);

struct PicardResult {
  PicardState state;
  bool converged = false;
  std::vector<IterationRecord> history;
};

/// Iterates until kappa < tol or k_max is reached. Without convergence the
/// iterate with the smallest kappa is returned.
PicardResult picard_run(const NSProblem& prob, const PicardConfig& cfg);

struct VelocityEstimate {
  std::vector<Vec3> value;
  std::vector<Vec3> std_err;
};

struct GradVelocityEstimate {
  std::vector<Mat3> value;
  std::vector<Mat3> std_err;
};

/// grad u(t, x) = E[grad u0(psi_{t,0}) eta_{t,0}]
///   - int_0^t (1 / (sigma (t - tau))) E[(grad p(tau, psi_{t,tau}) - grad p(tau, x)) (x) int_tau^t eta^T dw] dtau
/// with drift and Jacobian from `state.u`, `state.grad_u` and the pressure
/// of `state`. Trapezoid in tau on the time nodes below t plus t itself,
/// whose weight multiplies the limit Hess p(t, x). t must be a multiple of
/// cfg.dt in [0, t_final]. Raises UnsupportedModeError for sigma = 0.
GradVelocityEstimate compute_grad_velocity_bel(const PicardState& state, const NSProblem& prob,
                                               const PicardConfig& cfg, double t, std::span<const Vec3> xs);

/// Velocity of the next iterate at arbitrary points: transport of u0 minus
/// the pressure integral (same quadrature as above), using the drift and
/// pressure held by `state`. With shared_noise every point uses the same
/// Brownian paths, so differences between points are pathwise.
VelocityEstimate compute_velocity(const PicardState& state, const NSProblem& prob, const PicardConfig& cfg, double t,
                                  std::span<const Vec3> xs, bool shared_noise = false);

/// Constantin-Iyer velocity: runs the Picard driver with that backend on
/// [0, t] and evaluates the converged field at xs by its trigonometric
/// interpolant (std_err is interpolated trilinearly). t = 0 returns u0.
VelocityEstimate ci_velocity(const NSProblem& prob, const PicardConfig& cfg, double t, std::span<const Vec3> xs);

/// Weak-form residual against a divergence-free test field h:
///   |<u(t), h> - <u0, h> - int_0^t (<u, nu Lap h> + <u (x) u, grad h>) dtau|
/// by grid sums in space and Simpson (trapezoid for an odd number of
/// intervals) over the time nodes. budget = 3 std_err + bias + quadrature,
/// where std_err propagates the nodal standard errors linearly, bias is
/// eps_u (||h||_1 + t (nu ||Lap h||_1 + 2 ||u||_inf ||grad h||_1)) and
/// quadrature is |Simpson - trapezoid|.
struct WeakResidual {
  double residual = 0.0;
  double std_err = 0.0;
  double budget = 0.0;
  bool within_budget = false;
};

struct WeakSolutionReport {
  std::vector<WeakResidual> per_field;
  double max_residual = 0.0;
  bool within_budget = false;
};

WeakSolutionReport verify_weak_solution(const PicardState& state, const NSProblem& prob,
                                        std::span<const VectorField> test_fields, const PicardConfig& cfg);

/// Same check for a field given directly (e.g. an exact solution) sampled at
/// `times` on `grid`, with no statistical error and bias `eps_u`.
WeakSolutionReport verify_weak_solution(const VectorField& u, const std::vector<double>& times,
                                        const PeriodicGrid& grid, const NSProblem& prob,
                                        std::span<const VectorField> test_fields, double eps_u = 0.0);

/// Five divergence-free periodic test fields: three ABC variants, the
/// Taylor-Green vortex and a wavenumber-2 shear.
std::vector<VectorField> default_test_fields();

/// Order-of-magnitude discretisation bias of the velocity at time t, with
/// U = sup|u0|, G = sup|grad u0|, S2 = sum_a sup|d_a^2 u0|:
///   t [dt G (U G + nu S2) + (h^2 / 8) G S2]
/// (Euler-Maruyama weak error plus trilinear interpolation of the drift).
double velocity_bias_estimate(const NSProblem& prob, const PicardConfig& cfg, double t);

}  // namespace nsmc
