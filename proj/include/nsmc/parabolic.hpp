#pragma once

#include <span>
#include <vector>

#include "nsmc/fields.hpp"
#include "nsmc/flows.hpp"

namespace nsmc {

/// df/dt = L^g f - source on (t_start, t_final], f(t_start) = f0, where
/// L^g = (sigma^2 / 2) Lap - g . grad (the backward flow moves against g).
struct ParabolicProblem {
  VectorField g;
  double sigma = 1.0;
  ScalarField f0;
  ScalarField source;
  double t_final = 0.0;
  double t_start = 0.0;
};

/// Vector-valued counterpart (each component solves the scalar problem).
struct VectorParabolicProblem {
  VectorField g;
  double sigma = 1.0;
  VectorField f0;
  VectorField source;
  double t_final = 0.0;
  double t_start = 0.0;
};

template <class T>
struct MCResult {
  std::vector<T> values;
  std::vector<T> std_errs;
};

/// f(t_final, x) = E[ f0(psi_{t,t_start}(x)) - sum_j source(theta_j, X_j) dt ]
/// with the backward flow under drift g (left-point source quadrature).
/// cfg.sigma is overridden by the problem's sigma.
MCResult<double> solve_parabolic(const ParabolicProblem& prob, std::span<const Vec3> points, const FlowConfig& cfg);
MCResult<Vec3> solve_parabolic(const VectorParabolicProblem& prob, std::span<const Vec3> points, const FlowConfig& cfg);

/// One-path estimate of the solution as a field: evaluating it at y runs
/// a single path whose noise stream is keyed by (seed, bits of y). Used to
/// chain solves (the outer expectation averages the inner noise).
ScalarField single_path_solution(const ParabolicProblem& prob, const FlowConfig& cfg);

/// <E[f0 o psi_{t,0}], h> computed two ways on the grid: (a) backward Monte
/// Carlo at every node paired with h by Riemann sum; (b) forward transport
/// of h, E[h o phi_{0,t}], paired with f0. For divergence-free g both
/// equal the same number. The source term is not part of the pairing.
struct WeakPairing {
  double backward = 0.0;
  double backward_se = 0.0;
  double forward = 0.0;
  double forward_se = 0.0;
};
WeakPairing weak_pairing(const ParabolicProblem& prob, const ScalarField& h, const PeriodicGrid& grid,
                         const FlowConfig& cfg);

}  // namespace nsmc
