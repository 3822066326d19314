#include "nsmc/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>

#include "nsmc/errors.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/rng.hpp"
#include "nsmc/spectral.hpp"

namespace nsmc {

void PoissonConfig::validate() const {
  if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
  if (!(dt_bm > 0.0)) throw ConfigError("dt_bm must be > 0");
  if (!(t_max > 0.0)) throw ConfigError("t_max must be > 0");
  if (t_max / dt_bm > 1e9) throw ConfigError("t_max / dt_bm is too large");
}

namespace {

constexpr std::size_t kChunk = 32;

/// Running mean / sum of squared deviations, merged in a fixed order.
struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double tot = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / tot;
    m2 += o.m2 + d * d * n * o.n / tot;
    n = tot;
  }
  double std_err() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

/// Path functionals of one sampling unit (a single path or an antithetic
/// pair averaged), for every point of the batch.
struct UnitOutput {
  std::vector<double> value, value_tail;
  std::vector<Vec3> grad, grad_tail;
};

struct Plan {
  std::size_t units;
  long steps;
  double dt;
  long tail_start;
};

Plan make_plan(const PoissonConfig& cfg) {
  cfg.validate();
  Plan p;
  p.units = cfg.antithetic ? static_cast<std::size_t>((cfg.n_paths + 1) / 2) : static_cast<std::size_t>(cfg.n_paths);
  p.steps = std::max<long>(1, std::lround(cfg.t_max / cfg.dt_bm));
  p.dt = cfg.t_max / static_cast<double>(p.steps);
  p.tail_start = static_cast<long>(std::floor(0.9 * static_cast<double>(p.steps)));
  return p;
}

void simulate_unit(const ScalarField::Translates& tr, const Plan& plan, const PoissonConfig& cfg, std::size_t unit,
                   bool want_value, bool want_grad, UnitOutput& out, std::vector<double>& plus,
                   std::vector<double>& minus) {
  const std::size_t np = tr.size();
  std::fill(out.value.begin(), out.value.end(), 0.0);
  std::fill(out.value_tail.begin(), out.value_tail.end(), 0.0);
  std::fill(out.grad.begin(), out.grad.end(), Vec3::Zero());
  std::fill(out.grad_tail.begin(), out.grad_tail.end(), Vec3::Zero());
  NormalStream normal(stream_key(cfg.seed, {0x9015u, unit}));
  const double sqdt = std::sqrt(plan.dt);
  const double half_dt = 0.5 * plan.dt;
  Vec3 b = Vec3::Zero();
  for (long j = 0; j < plan.steps; ++j) {
    const bool tail = j >= plan.tail_start;
    if (cfg.antithetic) {
      tr.eval_pair(b, plus, minus);
      if (want_value) {
        for (std::size_t i = 0; i < np; ++i) {
          const double v = 0.5 * (plus[i] + minus[i]) * half_dt;
          out.value[i] += v;
          if (tail) out.value_tail[i] += v;
        }
      }
      if (want_grad && j > 0) {
        const double w = half_dt / (static_cast<double>(j) * plan.dt);
        for (std::size_t i = 0; i < np; ++i) {
          const Vec3 g = (0.5 * (plus[i] - minus[i]) * w) * b;
          out.grad[i] += g;
          if (tail) out.grad_tail[i] += g;
        }
      }
    } else {
      tr.eval(b, plus);
      if (want_value) {
        for (std::size_t i = 0; i < np; ++i) {
          const double v = plus[i] * half_dt;
          out.value[i] += v;
          if (tail) out.value_tail[i] += v;
        }
      }
      if (want_grad && j > 0) {
        const double w = half_dt / (static_cast<double>(j) * plan.dt);
        for (std::size_t i = 0; i < np; ++i) {
          const Vec3 g = (plus[i] * w) * b;
          out.grad[i] += g;
          if (tail) out.grad_tail[i] += g;
        }
      }
    }
    b += sqdt * normal.vec3();
  }
}

/// Runs all sampling units and reduces `n_stats` scalar statistics per
/// unit, produced by reduce(UnitOutput, double*), into Moments. Units are
/// grouped in fixed chunks merged in index order, so the result does not
/// depend on the worker count.
template <class Reduce>
std::vector<Moments> run_units(const ScalarField& gamma, double t, std::span<const Vec3> xs, const PoissonConfig& cfg,
                               bool want_value, bool want_grad, std::size_t n_stats, Reduce&& reduce) {
  const Plan plan = make_plan(cfg);
  const ScalarField::Translates tr(gamma, t, xs);
  const std::size_t n_chunks = (plan.units + kChunk - 1) / kChunk;
  std::vector<std::vector<Moments>> partial(n_chunks);
  parallel_for(n_chunks, [&](std::size_t c) {
    UnitOutput out;
    out.value.resize(xs.size());
    out.value_tail.resize(xs.size());
    out.grad.resize(xs.size());
    out.grad_tail.resize(xs.size());
    std::vector<double> plus(xs.size()), minus(xs.size()), stats(n_stats);
    auto& mom = partial[c];
    mom.assign(n_stats, Moments{});
    const std::size_t end = std::min(plan.units, (c + 1) * kChunk);
    for (std::size_t u = c * kChunk; u < end; ++u) {
      simulate_unit(tr, plan, cfg, u, want_value, want_grad, out, plus, minus);
      reduce(out, stats.data());
      for (std::size_t s = 0; s < n_stats; ++s) mom[s].add(stats[s]);
    }
  });
  std::vector<Moments> total(n_stats);
  for (const auto& p : partial) {
    for (std::size_t s = 0; s < n_stats; ++s) total[s].merge(p[s]);
  }
  return total;
}

// Monopole remainder of the truncated whole-space integral:
// 1/2 int_T^inf E gamma(x + B_tau) dtau ~ M erf(r / a) / (4 pi r), a = sqrt(2T).
double monopole_tail(double mass, double r, double t_max) {
  const double a = std::sqrt(2.0 * t_max);
  const double z = r / a;
  if (z < 1e-4) return mass / (4.0 * std::numbers::pi) * (2.0 / (a * std::sqrt(std::numbers::pi))) * (1.0 - z * z / 3.0);
  return mass * std::erf(z) / (4.0 * std::numbers::pi * r);
}

Vec3 monopole_tail_grad(double mass, const Vec3& d, double t_max) {
  const double r = d.norm();
  const double a = std::sqrt(2.0 * t_max);
  const double z = r / a;
  const double c = mass / (4.0 * std::numbers::pi);
  if (z < 1e-4) {
    // erf(z)/r = (2/(a sqrt(pi))) (1 - z^2/3 + ...), derivative along d.
    return c * (2.0 / (a * std::sqrt(std::numbers::pi))) * (-2.0 / (3.0 * a * a)) * d;
  }
  const double dr = (2.0 / (a * std::sqrt(std::numbers::pi))) * std::exp(-z * z) / r - std::erf(z) / (r * r);
  return c * dr * d / r;
}

}  // namespace

std::vector<PressureEstimate> pressure_mc(const ScalarField& gamma, double t, std::span<const Vec3> xs,
                                          const PoissonConfig& cfg, const Domain& domain) {
  validate(domain);
  const std::size_t np = xs.size();
  const auto mom = run_units(gamma, t, xs, cfg, true, false, 2 * np, [np](const UnitOutput& o, double* s) {
    for (std::size_t i = 0; i < np; ++i) {
      s[i] = o.value[i];
      s[np + i] = o.value_tail[i];
    }
  });
  std::vector<PressureEstimate> out(np);
  MassMoments mm;
  const auto* ws = std::get_if<WholeSpace>(&domain);
  if (ws) mm = mass_moments(gamma, t, *ws);
  for (std::size_t i = 0; i < np; ++i) {
    out[i].value = mom[i].mean;
    out[i].std_err = mom[i].std_err();
    out[i].tail = mom[np + i].mean;
    out[i].tail_warning = std::abs(out[i].tail) > 10.0 * out[i].std_err;
    if (ws) out[i].value += monopole_tail(mm.mass, (xs[i] - mm.centroid).norm(), cfg.t_max);
  }
  return out;
}

PressureEstimate pressure_mc(const ScalarField& gamma, double t, const Vec3& x, const PoissonConfig& cfg,
                             const Domain& domain) {
  return pressure_mc(gamma, t, std::span<const Vec3>(&x, 1), cfg, domain)[0];
}

std::vector<GradPressureEstimate> grad_pressure_mc(const ScalarField& gamma, double t, std::span<const Vec3> xs,
                                                   const PoissonConfig& cfg, const Domain& domain) {
  validate(domain);
  const std::size_t np = xs.size();
  const auto mom = run_units(gamma, t, xs, cfg, false, true, 6 * np, [np](const UnitOutput& o, double* s) {
    for (std::size_t i = 0; i < np; ++i) {
      for (int a = 0; a < 3; ++a) {
        s[3 * i + static_cast<std::size_t>(a)] = o.grad[i][a];
        s[3 * (np + i) + static_cast<std::size_t>(a)] = o.grad_tail[i][a];
      }
    }
  });
  const Plan plan = make_plan(cfg);
  MassMoments mm;
  const auto* ws = std::get_if<WholeSpace>(&domain);
  if (ws) mm = mass_moments(gamma, t, *ws);
  std::vector<GradPressureEstimate> out(np);
  for (std::size_t i = 0; i < np; ++i) {
    const Vec3 first_cell = 0.5 * gamma.gradient(t, xs[i]) * plan.dt;
    for (int a = 0; a < 3; ++a) {
      const auto& m = mom[3 * i + static_cast<std::size_t>(a)];
      out[i].value[a] = m.mean + first_cell[a];
      out[i].std_err[a] = m.std_err();
      out[i].tail[a] = mom[3 * (np + i) + static_cast<std::size_t>(a)].mean;
      if (std::abs(out[i].tail[a]) > 10.0 * out[i].std_err[a]) out[i].tail_warning = true;
    }
    if (ws) out[i].value += monopole_tail_grad(mm.mass, xs[i] - mm.centroid, cfg.t_max);
  }
  return out;
}

GradPressureEstimate grad_pressure_mc(const ScalarField& gamma, double t, const Vec3& x, const PoissonConfig& cfg,
                                      const Domain& domain) {
  return grad_pressure_mc(gamma, t, std::span<const Vec3>(&x, 1), cfg, domain)[0];
}

GradPressureEstimate grad_pressure_fd_mc(const ScalarField& gamma, double t, const Vec3& x, double h,
                                         const PoissonConfig& cfg, const Domain& domain) {
  validate(domain);
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be > 0");
  std::vector<Vec3> pts;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = h;
    pts.push_back(x + e);
    pts.push_back(x - e);
  }
  const auto mom = run_units(gamma, t, pts, cfg, true, false, 6, [h](const UnitOutput& o, double* s) {
    for (int a = 0; a < 3; ++a) {
      s[a] = (o.value[static_cast<std::size_t>(2 * a)] - o.value[static_cast<std::size_t>(2 * a + 1)]) / (2.0 * h);
      s[3 + a] = (o.value_tail[static_cast<std::size_t>(2 * a)] - o.value_tail[static_cast<std::size_t>(2 * a + 1)]) / (2.0 * h);
    }
  });
  GradPressureEstimate out;
  for (int a = 0; a < 3; ++a) {
    out.value[a] = mom[static_cast<std::size_t>(a)].mean;
    out.std_err[a] = mom[static_cast<std::size_t>(a)].std_err();
    out.tail[a] = mom[static_cast<std::size_t>(3 + a)].mean;
    if (std::abs(out.tail[a]) > 10.0 * out.std_err[a]) out.tail_warning = true;
  }
  if (const auto* ws = std::get_if<WholeSpace>(&domain)) {
    const MassMoments mm = mass_moments(gamma, t, *ws);
    for (int a = 0; a < 3; ++a) {
      out.value[a] += (monopole_tail(mm.mass, (pts[static_cast<std::size_t>(2 * a)] - mm.centroid).norm(), cfg.t_max) -
                       monopole_tail(mm.mass, (pts[static_cast<std::size_t>(2 * a + 1)] - mm.centroid).norm(), cfg.t_max)) /
                      (2.0 * h);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic oracles
// ---------------------------------------------------------------------------

namespace {

using Gauss20 = boost::math::quadrature::gauss<double, 20>;

/// Integrates f(r) r^2 over [0, r_max] on S^2-averaged values:
/// returns int_0^rmax r^p (int_{S^2} g(center + r w) dw) dr.
template <class G>
double spherical_integral(G&& g, const Vec3& center, double r_max, int power, const QuadratureConfig& q) {
  if (q.radial_panels < 1 || q.polar_nodes < 2 || q.azimuth_nodes < 3) throw ConfigError("quadrature resolution too low");
  // Polar nodes: Gauss-Legendre on cos(theta) in [-1, 1] via the 20-point
  // rule on sub-panels so any node count is supported.
  std::vector<double> mu, wmu;
  {
    const int panels = (q.polar_nodes + 19) / 20;
    const double width = 2.0 / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = -1.0 + p * width;
      const auto& abs = Gauss20::abscissa();
      const auto& wts = Gauss20::weights();
      for (std::size_t k = 0; k < abs.size(); ++k) {
        for (int sgn : {-1, 1}) {
          if (abs[k] == 0.0 && sgn < 0) continue;
          mu.push_back(a + 0.5 * width * (1.0 + sgn * abs[k]));
          wmu.push_back(0.5 * width * wts[k]);
        }
      }
    }
  }
  const double dphi = 2.0 * std::numbers::pi / q.azimuth_nodes;
  std::vector<Vec3> dirs;
  std::vector<double> wdir;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double s = std::sqrt(std::max(0.0, 1.0 - mu[i] * mu[i]));
    for (int k = 0; k < q.azimuth_nodes; ++k) {
      const double phi = (k + 0.5) * dphi;
      dirs.emplace_back(s * std::cos(phi), s * std::sin(phi), mu[i]);
      wdir.push_back(wmu[i] * dphi);
    }
  }
  const double panel = r_max / q.radial_panels;
  const auto& abs = Gauss20::abscissa();
  const auto& wts = Gauss20::weights();
  std::vector<double> panel_sum(static_cast<std::size_t>(q.radial_panels), 0.0);
  parallel_for(panel_sum.size(), [&](std::size_t p) {
    const double a = static_cast<double>(p) * panel;
    double acc = 0.0;
    for (std::size_t k = 0; k < abs.size(); ++k) {
      for (int sgn : {-1, 1}) {
        if (abs[k] == 0.0 && sgn < 0) continue;
        const double r = a + 0.5 * panel * (1.0 + sgn * abs[k]);
        double sphere = 0.0;
        for (std::size_t d = 0; d < dirs.size(); ++d) sphere += wdir[d] * g(center + r * dirs[d]);
        acc += 0.5 * panel * wts[k] * std::pow(r, power) * sphere;
      }
    }
    panel_sum[p] = acc;
  });
  double total = 0.0;
  for (double v : panel_sum) total += v;
  return total;
}

bool has_nonzero_mean(const std::vector<double>& v) {
  double sum = 0.0, scale = 0.0;
  for (double x : v) {
    sum += x;
    scale = std::max(scale, std::abs(x));
  }
  return std::abs(sum / static_cast<double>(v.size())) > 1e-10 * std::max(scale, 1e-300) && std::abs(sum) > 0.0;
}

std::vector<double> nodal(const ScalarField& f, double t, const PeriodicGrid& g) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = f.eval(t, g.point(i));
  return v;
}

}  // namespace

MassMoments mass_moments(const ScalarField& gamma, double t, const WholeSpace& domain, const QuadratureConfig& q) {
  if (const auto* fam = gamma.family()) {
    if (const auto* g = std::get_if<GaussianBump>(fam)) {
      return {g->amplitude * std::pow(2.0 * std::numbers::pi, 1.5) * std::pow(g->width, 3), g->center};
    }
    if (const auto* b = std::get_if<UniformBall>(fam)) {
      return {b->density * 4.0 / 3.0 * std::numbers::pi * std::pow(b->radius, 3), b->center};
    }
    if (std::holds_alternative<ZeroScalar>(*fam)) return {};
  }
  const Vec3 origin = Vec3::Zero();
  const double m = spherical_integral([&](const Vec3& y) { return gamma.eval(t, y); }, origin, domain.support_radius, 2, q);
  Vec3 c;
  for (int a = 0; a < 3; ++a) {
    c[a] = spherical_integral([&](const Vec3& y) { return y[a] * gamma.eval(t, y); }, origin, domain.support_radius, 2, q);
  }
  return {m, m != 0.0 ? Vec3(c / m) : Vec3::Zero()};
}

double newton_potential_quadrature(const ScalarField& gamma, double t, const Vec3& x, const Domain& domain,
                                   const QuadratureConfig& q) {
  validate(domain);
  if (const auto* cube = std::get_if<PeriodicCube>(&domain)) {
    const PeriodicGrid grid = cube->grid();
    const auto g = nodal(gamma, t, grid);
    if (has_nonzero_mean(g)) throw NoSolutionError("periodic Poisson problem needs a zero-mean source");
    const SpectralOps ops(grid);
    auto s = ops.forward(g);
    const int n = grid.n;
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n / 2 + 1; ++l, ++idx) {
          double k2 = 0.0;
          for (int a = 0; a < 3; ++a) k2 += std::pow(ops.wavenumber(a, i, j, l, false), 2);
          s[idx] = k2 == 0.0 ? 0.0 : s[idx] / k2;
        }
    return ops.evaluate(s, x);
  }
  const auto& ws = std::get<WholeSpace>(domain);
  const double r_max = x.norm() + ws.support_radius;
  return spherical_integral([&](const Vec3& y) { return gamma.eval(t, y); }, x, r_max, 1, q) / (4.0 * std::numbers::pi);
}

CalderonZygmund calderon_zygmund_check(const ScalarField& gamma, double t, const PeriodicCube& domain) {
  const PeriodicGrid grid = domain.grid();
  const auto g = nodal(gamma, t, grid);
  if (has_nonzero_mean(g)) throw NoSolutionError("Calderon-Zygmund check needs a zero-mean source");
  const SpectralOps ops(grid);
  const auto s = ops.forward(g);
  CalderonZygmund out;
  out.rhs = ops.integral_of_square(s);
  // |Hess p|_F^2 summed over (a, b) with p_hat = gamma_hat / |k|^2.
  SpectralOps::Spectrum h(s.size());
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      std::size_t idx = 0;
      const int n = grid.n;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int l = 0; l < n / 2 + 1; ++l, ++idx) {
            double k2 = 0.0;
            for (int c = 0; c < 3; ++c) k2 += std::pow(ops.wavenumber(c, i, j, l, false), 2);
            const double ka = ops.wavenumber(a, i, j, l, false);
            const double kb = ops.wavenumber(b, i, j, l, false);
            h[idx] = k2 == 0.0 ? 0.0 : -ka * kb * s[idx] / k2;
          }
      out.lhs += ops.integral_of_square(h);
    }
  }
  return out;
}

}  // namespace nsmc
