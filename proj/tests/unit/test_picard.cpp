#include <doctest.h>

#include <cmath>
#include <random>

#include "nsmc/apriori.hpp"
#include "nsmc/errors.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/picard.hpp"
#include "nsmc/spectral.hpp"

using namespace nsmc;

namespace {

PicardConfig small_config() {
  PicardConfig c;
  c.grid_n = 8;
  c.n_paths = 256;
  c.time_grid_n = 3;
  c.dt = 5e-3;
  c.k_max = 6;
  return c;
}

NSProblem beltrami_problem(double t_final) { return NSProblem{VectorField(Beltrami{}), 1.0, t_final, PeriodicCube{}}; }

Vec3 exact_beltrami(double t, const Vec3& x) { return std::exp(-0.5 * t) * VectorField(Beltrami{}).eval(0.0, x); }

double sup_error_vs_exact(const PicardState& s, std::size_t ti) {
  double err = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const auto v = s.u.at(ti, i);
    err = std::max(err, (Vec3(v[0], v[1], v[2]) - exact_beltrami(s.times[ti], s.grid.point(i))).norm());
  }
  return err;
}

std::vector<Vec3> random_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2 * std::numbers::pi);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

}  // namespace

TEST_CASE("initial iterate copies the data") {
  const auto prob = beltrami_problem(0.1);
  const auto s = picard_init(prob, small_config());
  CHECK(s.k == 1);
  const SpectralOps ops(s.grid);
  std::array<std::vector<double>, 3> comps;
  for (auto& c : comps) c.resize(s.grid.size());
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const Vec3 u0 = prob.u0.eval(0.0, s.grid.point(i));
    for (int c = 0; c < 3; ++c) comps[static_cast<std::size_t>(c)][i] = u0[c];
  }
  for (std::size_t ti = 0; ti < s.times.size(); ++ti) {
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
      const auto v = s.u.at(ti, i);
      CHECK((Vec3(v[0], v[1], v[2]) - prob.u0.eval(0.0, s.grid.point(i))).norm() == 0.0);
      CHECK(s.p.at(ti, i)[0] == 0.0);
    }
  }
  // Grid differentiation of the sampled u0 as an independent gradient oracle.
  for (int c = 0; c < 3; ++c) {
    const auto g = ops.gradient(comps[static_cast<std::size_t>(c)]);
    for (int j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < s.grid.size(); ++i)
        CHECK(s.grad_u.at(1, i)[static_cast<std::size_t>(3 * c + j)] ==
              doctest::Approx(g[static_cast<std::size_t>(j)][i]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("zero data is a fixed point") {
  NSProblem prob{VectorField(ZeroVector{}), 1.0, 0.1, PeriodicCube{}};
  const auto res = picard_run(prob, small_config());
  CHECK(res.converged);
  CHECK(res.state.k == 2);
  CHECK(res.history.back().kappa == 0.0);
  for (double v : res.state.u.values()) CHECK(v == 0.0);
  for (double v : res.state.p.values()) CHECK(v == 0.0);
}

TEST_CASE("constant data is transported unchanged") {
  const Vec3 c(0.3, -0.2, 0.5);
  NSProblem prob{VectorField(ConstantVector{c}), 1.0, 0.1, PeriodicCube{}};
  for (Backend b : {Backend::PaperPicard, Backend::ConstantinIyer}) {
    auto cfg = small_config();
    cfg.backend = b;
    const auto res = picard_run(prob, cfg);
    CHECK(res.converged);
    const auto& s = res.state;
    for (std::size_t ti = 0; ti < s.times.size(); ++ti)
      for (std::size_t i = 0; i < s.grid.size(); ++i) {
        const auto v = s.u.at(ti, i);
        CHECK((Vec3(v[0], v[1], v[2]) - c).norm() < 1e-12);
        CHECK(std::abs(s.p.at(ti, i)[0]) < 1e-12);
      }
  }
}

TEST_CASE("first step improves on the initial iterate") {
  const auto prob = beltrami_problem(0.05);
  auto cfg = small_config();
  cfg.time_grid_n = 2;
  const auto s1 = picard_init(prob, cfg);
  const auto s2 = picard_step(s1, prob, cfg);
  CHECK(sup_error_vs_exact(s2, 1) < sup_error_vs_exact(s1, 1));
}

TEST_CASE("Beltrami run converges to the exact decay") {
  const auto prob = beltrami_problem(0.1);
  const auto cfg = small_config();
  const auto res = picard_run(prob, cfg);
  REQUIRE(res.converged);
  const auto& h = res.history;
  for (std::size_t i = 2; i < h.size(); ++i) CHECK(h[i].kappa < h[i - 1].kappa);
  for (const auto& r : h) {
    CHECK(r.kappa >= 0.0);
    CHECK(r.kappa == doctest::Approx(r.rho + r.zeta + r.m));
  }
  const double rel = sup_error_vs_exact(res.state, 2) / (std::exp(-0.05) * 2 * std::sqrt(3.0));
  INFO("relative sup error " << rel);
  CHECK(rel < 0.05);
  CHECK(h.back().div_ratio < 0.05);
}

TEST_CASE("gradient norms stay below the a-priori bound") {
  const auto prob = beltrami_problem(0.1);
  const auto cfg = small_config();
  const auto res = picard_run(prob, cfg);
  const auto& s = res.state;
  const AprioriParams ap{s.K1[0], s.beta[0], 1.0, 1.0};
  const auto sol = solve_bound_odes(ap, prob.t_final, 1e-3);
  REQUIRE(sol.bounded_on_interval);
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    // alpha at s = t_final - tau bounds |grad u(tau)|.
    const auto idx = static_cast<std::size_t>(std::lround(s.times[j] / 1e-3));
    CHECK(s.K1[j] <= sol.alpha[idx] * (1 + 1e-12));
  }
}

TEST_CASE("heat-smoothed gradient without drift or pressure") {
  const auto prob = beltrami_problem(0.1);
  auto cfg = small_config();
  cfg.n_paths = 2048;
  auto s = picard_init(prob, cfg);
  for (double& v : s.u.mutable_values()) v = 0.0;
  for (double& v : s.grad_u.mutable_values()) v = 0.0;
  const auto xs = random_points(10, 3);
  const auto g = compute_grad_velocity_bel(s, prob, cfg, 0.1, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Mat3 exact = std::exp(-0.05) * prob.u0.gradient(0.0, xs[i]);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) CHECK(std::abs(g.value[i](a, b) - exact(a, b)) <= 3 * g.std_err[i](a, b) + 1e-12);
  }
}

TEST_CASE("BEL gradient agrees with finite differences of the velocity") {
  const auto prob = beltrami_problem(0.1);
  auto cfg = small_config();
  cfg.grid_n = 16;
  auto s = picard_step(picard_init(prob, cfg), prob, cfg);  // nonzero pressure
  // Constant drift keeps the interpolated drift and its Jacobian consistent,
  // isolating the pressure term of the BEL estimator.
  for (std::size_t i = 0; i < s.u.values().size(); ++i) s.u.mutable_values()[i] = 0.3 * (1 + i % 3);
  for (double& v : s.grad_u.mutable_values()) v = 0.0;
  cfg.n_paths = 4096;
  const auto xs = random_points(3, 5);
  const auto bel = compute_grad_velocity_bel(s, prob, cfg, 0.1, xs);
  const double h = 1e-3;
  const int reps = 32;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    // Replicated pathwise central differences give an honest standard error.
    Mat3 sum = Mat3::Zero(), sum2 = Mat3::Zero();
    for (int r = 0; r < reps; ++r) {
      auto c = cfg;
      c.n_paths = 512;
      c.seed = 1000 + r;
      Mat3 fd;
      for (int l = 0; l < 3; ++l) {
        const Vec3 e = Vec3::Unit(l) * h;
        const std::vector<Vec3> pair{xs[i] + e, xs[i] - e};
        const auto v = compute_velocity(s, prob, c, 0.1, pair, true);
        fd.col(l) = (v.value[0] - v.value[1]) / (2 * h);
      }
      sum += fd;
      sum2 += fd.cwiseProduct(fd);
    }
    const Mat3 mean = sum / reps;
    const Mat3 fd_se = ((sum2 / reps - mean.cwiseProduct(mean)) / (reps - 1)).cwiseMax(0.0).cwiseSqrt();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        INFO("point " << i << " entry " << a << b << ": bel " << bel.value[i](a, b) << " fd " << mean(a, b));
        CHECK(std::abs(bel.value[i](a, b) - mean(a, b)) <=
              3 * std::hypot(bel.std_err[i](a, b), fd_se(a, b)));
      }
  }
}

TEST_CASE("weak residual of exact and trivial fields") {
  const auto tests = default_test_fields();
  for (const auto& h : tests) {
    const PeriodicGrid grid(16, 2 * std::numbers::pi);
    const auto d = divergence(h, 0.0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(d.eval(0.0, grid.point(i))) < 1e-12);
  }
  const auto prob = beltrami_problem(0.1);
  const PeriodicGrid grid(16, 2 * std::numbers::pi);
  const auto rep = verify_weak_solution(VectorField(Beltrami{1, 1, 1, 0.5}), uniform_times(0.1, 3), grid, prob, tests);
  CHECK(rep.per_field.size() == 5);
  CHECK(rep.max_residual <= 1e-6);
  CHECK(rep.within_budget);

  NSProblem zero{VectorField(ZeroVector{}), 1.0, 0.1, PeriodicCube{}};
  const auto rz = verify_weak_solution(VectorField(ZeroVector{}), uniform_times(0.1, 3), grid, zero, tests);
  CHECK(rz.max_residual == 0.0);

  // A wrong decay rate is detected.
  const auto bad = verify_weak_solution(VectorField(Beltrami{1, 1, 1, 1.5}), uniform_times(0.1, 3), grid, prob, tests);
  CHECK(bad.max_residual > 1.0);
  CHECK_FALSE(bad.within_budget);
}

TEST_CASE("weak residual of a converged run is within budget") {
  const auto prob = beltrami_problem(0.1);
  const auto cfg = small_config();
  const auto res = picard_run(prob, cfg);
  const auto tests = default_test_fields();
  const auto rep = verify_weak_solution(res.state, prob, tests, cfg);
  for (const auto& r : rep.per_field) {
    INFO("residual " << r.residual << " budget " << r.budget << " se " << r.std_err);
    CHECK(r.within_budget);
  }
}

TEST_CASE("Constantin-Iyer backend") {
  const auto prob = beltrami_problem(0.05);
  auto cfg = small_config();
  cfg.time_grid_n = 2;
  const auto xs = random_points(5, 11);
  const auto u0 = ci_velocity(prob, cfg, 0.0, xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK((u0.value[i] - prob.u0.eval(0.0, xs[i])).norm() == 0.0);

  // Agreement with the PaperPicard backend at grid nodes.
  auto ci_cfg = cfg;
  ci_cfg.backend = Backend::ConstantinIyer;
  const auto a = picard_run(prob, cfg);
  const auto b = picard_run(prob, ci_cfg);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  const double bias = 2 * velocity_bias_estimate(prob, cfg, 0.05);
  int bad = 0;
  for (std::size_t i = 0; i < a.state.grid.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = std::abs(a.state.u.at(1, i)[static_cast<std::size_t>(c)] - b.state.u.at(1, i)[static_cast<std::size_t>(c)]);
      const double se = std::hypot(a.state.u_std_err.at(1, i)[static_cast<std::size_t>(c)],
                                   b.state.u_std_err.at(1, i)[static_cast<std::size_t>(c)]);
      bad += d > 3 * se + bias;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("Euler mode keeps the steady Beltrami flow") {
  NSProblem prob{VectorField(Beltrami{}), 0.0, 0.1, PeriodicCube{}};
  auto cfg = small_config();
  cfg.grid_n = 16;
  const auto res = picard_run(prob, cfg);
  REQUIRE(res.converged);
  const auto& s = res.state;
  const std::size_t last = s.times.size() - 1;
  double err = 0.0, p_dev_max = 0.0;
  double p_mean = 0.0, ex_mean = 0.0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const Vec3 u0 = prob.u0.eval(0.0, s.grid.point(i));
    p_mean += s.p.at(last, i)[0];
    ex_mean += -0.5 * u0.squaredNorm();
  }
  p_mean /= static_cast<double>(s.grid.size());
  ex_mean /= static_cast<double>(s.grid.size());
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const Vec3 u0 = prob.u0.eval(0.0, s.grid.point(i));
    const auto v = s.u.at(last, i);
    err = std::max(err, (Vec3(v[0], v[1], v[2]) - u0).norm());
    p_dev_max = std::max(p_dev_max, std::abs((s.p.at(last, i)[0] - p_mean) - (-0.5 * u0.squaredNorm() - ex_mean)));
  }
  const double budget = velocity_bias_estimate(prob, cfg, 0.1);
  INFO("velocity error " << err << " budget " << budget << " pressure deviation " << p_dev_max);
  CHECK(err <= budget);
  CHECK(p_dev_max < 0.05);
  CHECK_THROWS_AS(compute_grad_velocity_bel(s, prob, cfg, 0.1, std::vector<Vec3>{Vec3::Zero()}), UnsupportedModeError);
}

TEST_CASE("results do not depend on the thread count") {
  const auto prob = beltrami_problem(0.1);
  auto cfg = small_config();
  cfg.grid_n = 6;
  cfg.n_paths = 32;
  set_thread_count(1);
  const auto a = picard_run(prob, cfg);
  set_thread_count(3);
  const auto b = picard_run(prob, cfg);
  set_thread_count(1);
  CHECK(a.state.u.values() == b.state.u.values());
  CHECK(a.state.grad_u.values() == b.state.grad_u.values());
  CHECK(a.state.p.values() == b.state.p.values());
}

TEST_CASE("invalid problems are rejected") {
  auto cfg = small_config();
  NSProblem whole{VectorField(Beltrami{}), 1.0, 0.1, WholeSpace{}};
  CHECK_THROWS_AS(picard_init(whole, cfg), UnsupportedDomainError);
  NSProblem compressible{VectorField(LinearVector{Mat3::Identity(), Vec3::Zero()}), 1.0, 0.1, PeriodicCube{}};
  CHECK_THROWS_AS(picard_init(compressible, cfg), ConfigError);
  cfg.dt = 0.03;
  CHECK_THROWS_AS(picard_init(beltrami_problem(0.1), cfg), ConfigError);
  cfg = small_config();
  cfg.inner_tol = 1e-14;
  cfg.inner_max = 1;
  CHECK_THROWS_AS(picard_step(picard_init(beltrami_problem(0.1), cfg), beltrami_problem(0.1), cfg),
                  InnerDivergenceError);
}
