#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "nsmc/parallel.hpp"
#include "nsmc/poisson.hpp"
#include "nsmc/spectral.hpp"

using namespace nsmc;

namespace {

constexpr double kPi = std::numbers::pi;

// Newton potential of a Gaussian bump: the field of its mass M inside
// radius r, M erf(r / (sqrt 2 w)) / (4 pi r).
double gaussian_potential(const GaussianBump& g, const Vec3& x) {
  const double m = g.amplitude * std::pow(2 * kPi, 1.5) * std::pow(g.width, 3);
  const double r = (x - g.center).norm();
  if (r < 1e-12) return g.amplitude * g.width * g.width;
  return m * std::erf(r / (std::sqrt(2.0) * g.width)) / (4 * kPi * r);
}

ScalarField random_band_limited(std::mt19937_64& rng, int kmax) {
  std::normal_distribution<double> n;
  std::vector<CosineMode> modes;
  for (int i = 0; i < 6; ++i) {
    Vec3 k;
    do {
      k = Vec3(std::uniform_int_distribution<int>(-kmax, kmax)(rng), std::uniform_int_distribution<int>(-kmax, kmax)(rng),
               std::uniform_int_distribution<int>(-kmax, kmax)(rng));
    } while (k.norm() == 0.0);
    modes.push_back(CosineMode{k, n(rng), std::uniform_real_distribution<double>(0, 2 * kPi)(rng)});
  }
  return ScalarField(CustomScalar{[modes](double, const Vec3& x) {
                                    double s = 0.0;
                                    for (const auto& m : modes) s += m.amplitude * std::cos(m.wavevector.dot(x) + m.phase);
                                    return s;
                                  },
                                  {}});
}

}  // namespace

TEST_CASE("zero source gives zero pressure with zero error") {
  PoissonConfig cfg{64, 0.05, 2.0, 1, true};
  const auto p = pressure_mc(ScalarField(ZeroScalar{}), 0.0, Vec3(1, 2, 3), cfg);
  CHECK(p.value == 0.0);
  CHECK(p.std_err == 0.0);
  const auto g = grad_pressure_mc(ScalarField(ZeroScalar{}), 0.0, Vec3(1, 2, 3), cfg);
  CHECK(g.value.norm() == 0.0);
  CHECK(newton_potential_quadrature(ScalarField(ZeroScalar{}), 0.0, Vec3(0.2, 0, 0), WholeSpace{1.0}) == 0.0);
  const auto cz = calderon_zygmund_check(ScalarField(ZeroScalar{}), 0.0);
  CHECK(cz.lhs == 0.0);
  CHECK(cz.rhs == 0.0);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(PoissonConfig({0, 0.1, 1.0, 0, true}).validate(), ConfigError);
  CHECK_THROWS_AS(PoissonConfig({10, 0.0, 1.0, 0, true}).validate(), ConfigError);
  CHECK_THROWS_AS(PoissonConfig({10, 0.1, -1.0, 0, true}).validate(), ConfigError);
}

TEST_CASE("periodic cosine source: pressure equals the source") {
  const ScalarField gamma(CosineMode{Vec3::UnitX(), 1.0, 0.0});
  PoissonConfig cfg{2048, 1e-2, 20.0, 42, true};
  std::vector<Vec3> xs;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 2 * kPi);
  for (int i = 0; i < 8; ++i) xs.emplace_back(u(rng), u(rng), u(rng));
  const auto p = pressure_mc(gamma, 0.0, xs, cfg);
  const auto g = grad_pressure_mc(gamma, 0.0, xs, cfg);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(std::abs(p[i].value - std::cos(xs[i].x())) <= 3 * p[i].std_err + 2 * cfg.dt_bm);
    CHECK_FALSE(p[i].tail_warning);
    const Vec3 exact(-std::sin(xs[i].x()), 0, 0);
    for (int a = 0; a < 3; ++a) CHECK(std::abs(g[i].value[a] - exact[a]) <= 3 * g[i].std_err[a] + 2 * cfg.dt_bm);
  }
  // Spectral oracle agrees with the closed form.
  CHECK(newton_potential_quadrature(gamma, 0.0, xs[0], PeriodicCube{}) == doctest::Approx(std::cos(xs[0].x())).epsilon(1e-12));
}

TEST_CASE("periodic nonzero-mean source has no solution") {
  CHECK_THROWS_AS(newton_potential_quadrature(ScalarField(ConstantScalar{1.0}), 0.0, Vec3::Zero(), PeriodicCube{}),
                  NoSolutionError);
  CHECK_THROWS_AS(calderon_zygmund_check(ScalarField(ConstantScalar{2.0}), 0.0), NoSolutionError);
}

TEST_CASE("whole-space quadrature matches closed forms") {
  const GaussianBump bump{Vec3(0.1, -0.2, 0.05), 0.4, 1.3};
  const ScalarField g(bump);
  const WholeSpace ws{0.4 * 9};
  for (const Vec3& x : {Vec3(0, 0, 0), Vec3(0.5, 0.3, -0.2), Vec3(1.5, 0, 1.0)}) {
    CHECK(newton_potential_quadrature(g, 0.0, x, ws) == doctest::Approx(gaussian_potential(bump, x)).epsilon(1e-8));
  }
  // Interior potential of a uniform ball at its centre: rho R^2 / 2, from
  // -(r^2 p')' / r^2 = rho.
  const double rho = 2.5, radius = 0.8;
  const ScalarField ball(UniformBall{Vec3::Zero(), radius, rho});
  CHECK(newton_potential_quadrature(ball, 0.0, Vec3::Zero(), WholeSpace{radius}) ==
        doctest::Approx(rho * radius * radius / 2).epsilon(1e-8));
}

TEST_CASE("whole-space quadrature self-convergence") {
  const ScalarField g(GaussianBump{Vec3(0.3, 0, 0), 0.5, 1.0});
  const WholeSpace ws{4.0};
  const Vec3 x(-0.4, 0.7, 0.2);
  const double coarse = newton_potential_quadrature(g, 0.0, x, ws, {32, 20, 32});
  const double fine = newton_potential_quadrature(g, 0.0, x, ws, {64, 40, 64});
  CHECK(std::abs(coarse - fine) <= 1e-6 * std::abs(fine));
}

TEST_CASE("mass moments of closed-form and custom sources agree") {
  const GaussianBump bump{Vec3(0.2, -0.1, 0.3), 0.3, 2.0};
  const auto exact = mass_moments(ScalarField(bump), 0.0, WholeSpace{3.0});
  const ScalarField custom(CustomScalar{[bump](double, const Vec3& x) { return ScalarField(bump).eval(0, x); }, {}});
  const auto quad = mass_moments(custom, 0.0, WholeSpace{3.0});
  CHECK(quad.mass == doctest::Approx(exact.mass).epsilon(1e-8));
  CHECK((quad.centroid - exact.centroid).norm() < 1e-8);
}

TEST_CASE("whole-space Monte Carlo pressure matches quadrature") {
  const GaussianBump bump{Vec3::Zero(), 0.5, 1.0};
  const ScalarField g(bump);
  const WholeSpace ws{5.0};
  PoissonConfig cfg{4096, 2e-3, 4.0, 7, true};
  const std::vector<Vec3> xs = {Vec3(0, 0, 0), Vec3(0.6, 0.2, 0), Vec3(1.2, -0.5, 0.8)};
  const auto p = pressure_mc(g, 0.0, xs, cfg, ws);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double q = newton_potential_quadrature(g, 0.0, xs[i], ws);
    INFO("x = " << xs[i].transpose() << " mc " << p[i].value << " se " << p[i].std_err << " quad " << q);
    CHECK(std::abs(p[i].value - q) <= 3 * p[i].std_err + 2 * cfg.dt_bm * bump.amplitude);
  }
}

TEST_CASE("gradient vanishes by symmetry for a source centred at x") {
  const ScalarField g(GaussianBump{Vec3(0.3, 0.3, 0.3), 0.5, 2.0});
  PoissonConfig cfg{2048, 5e-3, 4.0, 3, false};
  const auto e = grad_pressure_mc(g, 0.0, Vec3(0.3, 0.3, 0.3), cfg, WholeSpace{4.0});
  for (int a = 0; a < 3; ++a) CHECK(std::abs(e.value[a]) <= 3 * e.std_err[a]);
}

TEST_CASE("gradient estimator agrees with finite differences of the pressure estimator") {
  const ScalarField g(GaussianBump{Vec3::Zero(), 0.5, 1.0});
  const WholeSpace ws{5.0};
  PoissonConfig cfg{2048, 2e-3, 4.0, 11, true};
  PoissonConfig cfg_fd = cfg;
  cfg_fd.seed = 12;
  for (const Vec3& x : {Vec3(0.4, 0.1, -0.3), Vec3(-0.8, 0.5, 0.2)}) {
    const auto bel = grad_pressure_mc(g, 0.0, x, cfg, ws);
    const auto fd = grad_pressure_fd_mc(g, 0.0, x, 1e-3, cfg_fd, ws);
    for (int a = 0; a < 3; ++a) {
      const double tol = 3 * std::hypot(bel.std_err[a], fd.std_err[a]);
      INFO("axis " << a << " bel " << bel.value[a] << " fd " << fd.value[a] << " tol " << tol);
      CHECK(std::abs(bel.value[a] - fd.value[a]) <= tol);
    }
  }
}

TEST_CASE("Calderon-Zygmund identity") {
  const auto cz = calderon_zygmund_check(ScalarField(CosineMode{Vec3::UnitX(), 1.0, 0.0}), 0.0);
  const double vol = std::pow(2 * kPi, 3);
  CHECK(cz.rhs == doctest::Approx(vol / 2).epsilon(1e-12));
  CHECK(cz.lhs == doctest::Approx(vol / 2).epsilon(1e-12));
  // Direct grid sum of gamma^2 as an independent check of the rhs.
  const PeriodicGrid grid = PeriodicCube{}.grid();
  double direct = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) direct += std::pow(std::cos(grid.point(i).x()), 2) * grid.cell_volume();
  CHECK(cz.rhs == doctest::Approx(direct).epsilon(1e-12));

  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = calderon_zygmund_check(random_band_limited(rng, 7), 0.0);
    CHECK(std::abs(r.lhs - r.rhs) <= 1e-8 * r.rhs);
  }
}

TEST_CASE("sup and L^q bounds of the Newton potential are uniform over a corpus") {
  std::mt19937_64 rng(23);
  const PeriodicCube cube{2 * kPi, 16};
  const PeriodicGrid grid = cube.grid();
  double worst_sup = 0.0, worst_l2 = 0.0, worst_l4 = 0.0;
  for (int c = 0; c < 10; ++c) {
    const auto gamma = random_band_limited(rng, 1 + c % 4);
    std::vector<double> gv(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) gv[i] = gamma.eval(0, grid.point(i));
    const auto pv = SpectralOps(grid).poisson(gv, false).p;
    CHECK(pv[17] == doctest::Approx(newton_potential_quadrature(gamma, 0, grid.point(17), cube)).epsilon(1e-10));
    double sup = 0.0;
    for (double v : pv) sup = std::max(sup, std::abs(v));
    worst_sup = std::max(worst_sup, sup / (grid_lq_norm(gv, grid, 1) + grid_lq_norm(gv, grid, 4)));
    worst_l2 = std::max(worst_l2, grid_lq_norm(pv, grid, 2) / grid_lq_norm(gv, grid, 2));
    worst_l4 = std::max(worst_l4, grid_lq_norm(pv, grid, 4) / grid_lq_norm(gv, grid, 4));
  }
  MESSAGE("sup ratio " << worst_sup << ", L2 ratio " << worst_l2 << ", L4 ratio " << worst_l4);
  // On the torus the lowest nonzero |k| is 1, so the multiplier 1/|k|^2 is at most 1.
  CHECK(worst_l2 <= 1.0 + 1e-12);
  CHECK(worst_l4 <= 2.0);
  CHECK(worst_sup <= 1.0);
}

TEST_CASE("variance halves when the path count doubles") {
  const ScalarField g(CosineMode{Vec3(1, 1, 0), 1.0, 0.3});
  std::vector<double> logn, logv;
  for (int n = 256; n <= 4096; n *= 2) {
    const auto p = pressure_mc(g, 0.0, Vec3(0.5, 0.1, 0.2), PoissonConfig{n, 0.05, 10.0, 5, false});
    logn.push_back(std::log(n));
    logv.push_back(std::log(p.std_err * p.std_err));
  }
  const double mx = std::accumulate(logn.begin(), logn.end(), 0.0) / logn.size();
  const double my = std::accumulate(logv.begin(), logv.end(), 0.0) / logv.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < logn.size(); ++i) {
    sxy += (logn[i] - mx) * (logv[i] - my);
    sxx += (logn[i] - mx) * (logn[i] - mx);
  }
  CHECK(sxy / sxx == doctest::Approx(-1.0).epsilon(0.2));
}

TEST_CASE("tail of a zero-mean periodic source is negligible at t_max = 20") {
  // E gamma(x + B_tau) = (exp(tau Lap / 2) gamma)(x), evaluated mode by mode
  // on the grid spectrum; the truncated remainder is then
  // 1/2 int_T^inf exp(-|k|^2 tau / 2) dtau = exp(-|k|^2 T / 2) / |k|^2 per mode.
  std::mt19937_64 rng(31);
  const PeriodicGrid grid = PeriodicCube{}.grid();
  const SpectralOps ops(grid);
  for (int c = 0; c < 3; ++c) {
    const auto gamma = random_band_limited(rng, 3);
    std::vector<double> gv(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) gv[i] = gamma.eval(0, grid.point(i));
    const auto s = ops.forward(gv);
    auto tail = s, total = s;
    std::size_t idx = 0;
    for (int i = 0; i < grid.n; ++i)
      for (int j = 0; j < grid.n; ++j)
        for (int l = 0; l < grid.n / 2 + 1; ++l, ++idx) {
          double k2 = 0.0;
          for (int a = 0; a < 3; ++a) k2 += std::pow(ops.wavenumber(a, i, j, l, false), 2);
          total[idx] = k2 == 0.0 ? 0.0 : s[idx] / k2;
          tail[idx] = k2 == 0.0 ? 0.0 : s[idx] * std::exp(-k2 * 20.0 / 2.0) / k2;
        }
    const double total_norm = std::sqrt(ops.integral_of_square(total));
    const double tail_norm = std::sqrt(ops.integral_of_square(tail));
    CHECK(tail_norm < 1e-4 * total_norm);
  }
  // The Monte Carlo window over the last 10% is consistent with zero.
  const ScalarField g(CosineMode{Vec3::UnitX(), 1.0, 0.0});
  const auto p = pressure_mc(g, 0.0, Vec3(0.1, 0, 0), PoissonConfig{512, 1e-2, 20.0, 1, true});
  CHECK_FALSE(p.tail_warning);
}

TEST_CASE("results are bit-identical across worker counts") {
  const ScalarField g(GaussianBump{Vec3::Zero(), 0.5, 1.0});
  const std::vector<Vec3> xs = {Vec3(0.1, 0.2, 0.3), Vec3(-0.5, 0, 0.2)};
  PoissonConfig cfg{300, 1e-2, 2.0, 99, true};
  const int saved = thread_count();
  set_thread_count(1);
  const auto a = pressure_mc(g, 0.0, xs, cfg, WholeSpace{3});
  const auto ga = grad_pressure_mc(g, 0.0, xs, cfg, WholeSpace{3});
  set_thread_count(4);
  const auto b = pressure_mc(g, 0.0, xs, cfg, WholeSpace{3});
  const auto gb = grad_pressure_mc(g, 0.0, xs, cfg, WholeSpace{3});
  set_thread_count(saved);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].std_err == b[i].std_err);
    for (int k = 0; k < 3; ++k) CHECK(ga[i].value[k] == gb[i].value[k]);
  }
}
