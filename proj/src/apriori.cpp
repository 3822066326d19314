#include "nsmc/apriori.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "nsmc/errors.hpp"

namespace nsmc {

void AprioriParams::validate() const {
  const std::array<std::pair<const char*, double>, 4> v{{{"K01", K01}, {"beta0", beta0}, {"C_qm", C_qm}, {"C1_qm", C1_qm}}};
  for (const auto& [name, x] : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(std::string("apriori.") + name + " must be finite and >= 0");
  }
}

namespace {

using State = std::array<double, 2>;

constexpr double kBlowUp = 1e12;
constexpr double kDoublingTol = 1e-2;

// Right-hand side in the backward variable r = t - s, so both grow.
State rhs(const AprioriParams& p, const State& y) {
  const double a = y[0], b = y[1];
  return {a * a + p.C_qm * a * b, a * b + p.C1_qm * a * b};
}

State rk4(const AprioriParams& p, const State& y, double h) {
  auto axpy = [](const State& y, double c, const State& k) { return State{y[0] + c * k[0], y[1] + c * k[1]}; };
  const State k1 = rhs(p, y);
  const State k2 = rhs(p, axpy(y, h / 2, k1));
  const State k3 = rhs(p, axpy(y, h / 2, k2));
  const State k4 = rhs(p, axpy(y, h, k3));
  return {y[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
          y[1] + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
}

bool finite_and_small(const State& y) {
  return std::isfinite(y[0]) && std::isfinite(y[1]) && y[0] <= kBlowUp && y[1] <= kBlowUp;
}

/// One step with the doubling check; false on blow-up.
bool guarded_step(const AprioriParams& p, State& y, double h) {
  const State full = rk4(p, y, h);
  const State half = rk4(p, rk4(p, y, h / 2), h / 2);
  if (!finite_and_small(full) || !finite_and_small(half)) return false;
  for (int i = 0; i < 2; ++i) {
    if (std::abs(full[i] - half[i]) > kDoublingTol * (1.0 + std::abs(half[i]))) return false;
  }
  y = half;
  return true;
}

BoundSolution integrate(const AprioriParams& params, double t, double ds, bool extend) {
  if (!(ds > 0.0)) throw ConfigError("apriori ds must be > 0");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("apriori t must be finite and >= 0");
  BoundSolution out;
  State y{params.K01, params.beta0};
  double r = 0.0;
  out.s_grid.push_back(t);
  out.alpha.push_back(y[0]);
  out.beta.push_back(y[1]);
  if (params.K01 == 0.0) return out;  // zero right-hand side for all s

  const double cap = extend ? std::max(t, kHorizonCap) : t;
  while (r < cap) {
    const double h = r < t ? std::min(ds, t - r) : ds;
    const State prev = y;
    if (!guarded_step(params, y, h)) {
      out.T1 = r + h / 2;
      out.bounded_on_interval = r + h / 2 > t;
      return out;
    }
    if (y[0] < prev[0] || y[1] < prev[1]) throw DataError("bound trajectories lost monotonicity");
    r += h;
    if (r <= t + 1e-12 * t) {
      out.s_grid.push_back(std::max(0.0, t - r));
      out.alpha.push_back(y[0]);
      out.beta.push_back(y[1]);
    }
  }
  if (!extend) out.T1 = t;
  return out;
}

}  // namespace

BoundSolution solve_bound_odes(const AprioriParams& params, double t, double ds) {
  params.validate();
  return integrate(params, t, ds, true);
}

double existence_horizon(const AprioriParams& params, double ds) {
  params.validate();
  if (!(ds > 0.0)) throw ConfigError("apriori ds must be > 0");
  if (params.K01 == 0.0) return kUnboundedHorizon;
  auto bounded = [&](double t) { return integrate(params, t, ds, false).bounded_on_interval; };
  double lo = 0.0, hi = 1.0;
  while (bounded(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > kHorizonCap) return kUnboundedHorizon;
  }
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    (bounded(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace nsmc
