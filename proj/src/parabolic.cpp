#include "nsmc/parabolic.hpp"

#include <bit>
#include <cmath>

#include "nsmc/errors.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/rng.hpp"

namespace nsmc {

namespace {

int steps_between(double t0, double t1, double dt) {
  if (!(t1 >= t0)) throw ConfigError("parabolic t_final must be >= t_start");
  const double r = (t1 - t0) / dt;
  const long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-6 * std::max(1.0, r)) {
    throw ConfigError("parabolic horizon is not a multiple of dt");
  }
  return static_cast<int>(n);
}

double value_of(const ScalarField& f, double t, const Vec3& x) { return f.eval(t, x); }
Vec3 value_of(const VectorField& f, double t, const Vec3& x) { return f.eval(t, x); }

double zero_like(double) { return 0.0; }
Vec3 zero_like(const Vec3&) { return Vec3::Zero(); }

double sq(double v) { return v * v; }
Vec3 sq(const Vec3& v) { return v.cwiseProduct(v); }
double root(double v) { return std::sqrt(v); }
Vec3 root(const Vec3& v) { return v.cwiseSqrt(); }

/// One backward path from x; returns f0(X_N) - sum source dt.
template <class Problem>
auto one_path(const Problem& prob, const Vec3& x, int steps, double dt, NormalStream& normal) {
  using T = decltype(value_of(prob.f0, 0.0, x));
  const double sqdt = std::sqrt(dt);
  Vec3 X = x;
  T acc = zero_like(T{});
  for (int j = 0; j < steps; ++j) {
    const double theta = prob.t_final - j * dt;
    acc = acc - value_of(prob.source, theta, X) * dt;
    X += -prob.g.eval(theta, X) * dt;
    if (prob.sigma > 0.0) X += prob.sigma * sqdt * normal.vec3();
  }
  return T(acc + value_of(prob.f0, prob.t_start, X));
}

template <class Problem>
auto solve_impl(const Problem& prob, std::span<const Vec3> points, const FlowConfig& cfg) {
  using T = decltype(value_of(prob.f0, 0.0, Vec3::Zero()));
  FlowConfig c = cfg;
  c.sigma = prob.sigma;
  c.validate();
  const int steps = steps_between(prob.t_start, prob.t_final, c.dt);
  MCResult<T> out;
  out.values.assign(points.size(), zero_like(T{}));
  out.std_errs.assign(points.size(), zero_like(T{}));
  const auto n_paths = static_cast<std::size_t>(c.n_paths);
  std::vector<T> samples(points.size() * n_paths);
  parallel_for(samples.size(), [&](std::size_t k) {
    const std::uint64_t point = k / n_paths;
    const std::uint64_t path = k % n_paths;
    NormalStream normal(stream_key(c.seed, {0xf10u, c.shared_noise ? 0u : point, path}));
    samples[k] = one_path(prob, points[point], steps, c.dt, normal);
  });
  for (std::size_t i = 0; i < points.size(); ++i) {
    T mean = zero_like(T{});
    for (std::size_t p = 0; p < n_paths; ++p) mean = mean + samples[i * n_paths + p];
    mean = mean / static_cast<double>(n_paths);
    T var = zero_like(T{});
    for (std::size_t p = 0; p < n_paths; ++p) var = var + sq(samples[i * n_paths + p] - mean);
    out.values[i] = mean;
    out.std_errs[i] = n_paths > 1 ? T(root(var / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths)))
                                  : zero_like(T{});
  }
  return out;
}

}  // namespace

MCResult<double> solve_parabolic(const ParabolicProblem& prob, std::span<const Vec3> points, const FlowConfig& cfg) {
  return solve_impl(prob, points, cfg);
}

MCResult<Vec3> solve_parabolic(const VectorParabolicProblem& prob, std::span<const Vec3> points, const FlowConfig& cfg) {
  return solve_impl(prob, points, cfg);
}

ScalarField single_path_solution(const ParabolicProblem& prob, const FlowConfig& cfg) {
  FlowConfig c = cfg;
  c.sigma = prob.sigma;
  c.validate();
  const int steps = steps_between(prob.t_start, prob.t_final, c.dt);
  return ScalarField(CustomScalar{[prob, c, steps](double, const Vec3& y) {
                                    NormalStream normal(stream_key(c.seed, {0x51u, std::bit_cast<std::uint64_t>(y.x()),
                                                                            std::bit_cast<std::uint64_t>(y.y()),
                                                                            std::bit_cast<std::uint64_t>(y.z())}));
                                    return one_path(prob, y, steps, c.dt, normal);
                                  },
                                  {}});
}

WeakPairing weak_pairing(const ParabolicProblem& prob, const ScalarField& h, const PeriodicGrid& grid,
                         const FlowConfig& cfg) {
  std::vector<Vec3> nodes(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) nodes[i] = grid.point(i);
  const double dv = grid.cell_volume();
  WeakPairing out;

  ParabolicProblem back = prob;
  back.source = ScalarField(ZeroScalar{});
  const auto a = solve_parabolic(back, nodes, cfg);
  double var = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double hv = h.eval(prob.t_final, nodes[i]);
    out.backward += a.values[i] * hv * dv;
    var += std::pow(a.std_errs[i] * hv * dv, 2);
  }
  out.backward_se = std::sqrt(var);

  FlowConfig fc = cfg;
  fc.sigma = prob.sigma;
  fc.store_increments = false;
  fc.seed = cfg.seed ^ 0x5bd1e995u;
  VectorField drift = prob.g;
  if (prob.t_start != 0.0) {
    const VectorField g = prob.g;
    const double t0 = prob.t_start;
    drift = VectorField(CustomVector{[g, t0](double s, const Vec3& x) { return g.eval(s + t0, x); },
                                     [g, t0](double s, const Vec3& x) { return g.gradient(s + t0, x); }});
  }
  const auto fwd = simulate_forward_flow(drift, prob.t_final - prob.t_start, nodes, fc);
  var = 0.0;
  const auto n_paths = static_cast<std::size_t>(fc.n_paths);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    double m = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
      const double v = h.eval(prob.t_final, fwd.endpoint(i * n_paths + p));
      m += v;
      m2 += v * v;
    }
    m /= static_cast<double>(n_paths);
    const double se = n_paths > 1 ? std::sqrt(std::max(0.0, m2 / n_paths - m * m) / static_cast<double>(n_paths - 1)) : 0.0;
    const double fv = prob.f0.eval(prob.t_start, nodes[i]);
    out.forward += fv * m * dv;
    var += std::pow(fv * se * dv, 2);
  }
  out.forward_se = std::sqrt(var);
  return out;
}

}  // namespace nsmc
