#pragma once

#include <limits>
#include <vector>

namespace nsmc {

/// Terminal data and constants of the bound system
///   d alpha/ds = -alpha^2 - C_qm alpha beta
///   d beta/ds  = -alpha beta - C1_qm alpha beta
/// with alpha(t) = K01, beta(t) = beta0. The constants are inputs; the
/// horizon is conditional on them.
struct AprioriParams {
  double K01 = 0.0;
  double beta0 = 0.0;
  double C_qm = 1.0;
  double C1_qm = 1.0;

  void validate() const;
};

inline constexpr double kUnboundedHorizon = std::numeric_limits<double>::infinity();

/// Backward solution on [0, t] (s_grid descending from t). When the bounds
/// blow up inside [0, t] the arrays stop at the last finite step.
/// T1 is the length of the backward interval on which the bounds stay
/// finite, or kUnboundedHorizon.
struct BoundSolution {
  std::vector<double> s_grid;
  std::vector<double> alpha;
  std::vector<double> beta;
  double T1 = kUnboundedHorizon;
  bool bounded_on_interval = true;
};

/// Classical RK4 from s = t down to s = 0 and on past 0 (not stored) until
/// blow-up or a backward span of kHorizonCap. Blow-up: alpha or beta above
/// 1e12, non-finite, or a failed step-doubling check.
BoundSolution solve_bound_odes(const AprioriParams& params, double t, double ds);

inline constexpr double kHorizonCap = 1e4;

/// Largest t with solve_bound_odes(params, t, ds) bounded on [0, t],
/// by bisection to 1e-3.
double existence_horizon(const AprioriParams& params, double ds);

}  // namespace nsmc
