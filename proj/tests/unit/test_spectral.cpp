#include <doctest.h>

#include <cmath>
#include <random>

#include "nsmc/spectral.hpp"

using namespace nsmc;

namespace {

std::vector<double> sample(const PeriodicGrid& g, auto&& fn) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = fn(g.point(i));
  return v;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("forward/inverse round trip") {
  const PeriodicGrid g(10, 3.0);
  const SpectralOps ops(g);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> f(g.size());
  for (auto& v : f) v = n(rng);
  CHECK(max_diff(ops.inverse(ops.forward(f)), f) < 1e-13);
}

TEST_CASE("derivatives and Laplacian of trigonometric data are exact") {
  const PeriodicGrid g(16, 2 * std::numbers::pi);
  const SpectralOps ops(g);
  const auto f = sample(g, [](const Vec3& x) { return std::sin(2 * x.x()) * std::cos(x.y()) + std::sin(3 * x.z()); });
  const auto fz = sample(g, [](const Vec3& x) { return 3 * std::cos(3 * x.z()); });
  const auto fx = sample(g, [](const Vec3& x) { return 2 * std::cos(2 * x.x()) * std::cos(x.y()); });
  const auto lap = sample(g, [](const Vec3& x) { return -5 * std::sin(2 * x.x()) * std::cos(x.y()) - 9 * std::sin(3 * x.z()); });
  CHECK(max_diff(ops.derivative(f, 2), fz) < 1e-12);
  CHECK(max_diff(ops.gradient(f)[0], fx) < 1e-12);
  CHECK(max_diff(ops.laplacian(f), lap) < 1e-11);
}

TEST_CASE("Poisson solve inverts minus Laplacian on zero-mean data") {
  const PeriodicGrid g(16, 2.0);
  const SpectralOps ops(g);
  const double k = std::numbers::pi;
  const auto p_exact = sample(g, [&](const Vec3& x) { return std::cos(k * x.x()) * std::sin(2 * k * x.y()) + std::cos(3 * k * x.z()); });
  const auto gamma = ops.laplacian(p_exact);
  std::vector<double> rhs(gamma.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -gamma[i];
  const auto sol = ops.poisson(rhs, true);
  CHECK(max_diff(sol.p, p_exact) < 1e-12);
  const auto px = ops.derivative(p_exact, 0);
  CHECK(max_diff(sol.grad[0], px) < 1e-11);
  const auto pxy = ops.derivative(ops.derivative(p_exact, 0), 1);
  CHECK(max_diff(sol.hessian[1], pxy) < 1e-10);
  const auto pzz = sample(g, [&](const Vec3& x) { return -9 * k * k * std::cos(3 * k * x.z()); });
  CHECK(max_diff(sol.hessian[5], pzz) < 1e-9);
}

TEST_CASE("point evaluation reproduces band-limited functions off the grid") {
  const PeriodicGrid g(8, 2 * std::numbers::pi);
  const SpectralOps ops(g);
  auto fn = [](const Vec3& x) {
    return 0.5 + std::sin(x.x() + 2 * x.y()) - std::cos(3 * x.z()) * std::sin(x.y()) + 0.2 * std::cos(4 * x.x());
  };
  const auto s = ops.forward(sample(g, fn));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 9.0);
  for (int i = 0; i < 20; ++i) {
    const Vec3 x(u(rng), u(rng), u(rng));
    CHECK(ops.evaluate(s, x) == doctest::Approx(fn(x)).epsilon(1e-12).scale(1.0));
  }
  for (std::size_t i = 0; i < g.size(); i += 37) CHECK(ops.evaluate(s, g.point(i)) == doctest::Approx(fn(g.point(i))).scale(1.0));
}

TEST_CASE("Parseval matches the nodal Riemann sum") {
  const PeriodicGrid g(9, 1.7);
  const SpectralOps ops(g);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  std::vector<double> f(g.size());
  double direct = 0.0;
  for (auto& v : f) {
    v = n(rng);
    direct += v * v * g.cell_volume();
  }
  CHECK(ops.integral_of_square(ops.forward(f)) == doctest::Approx(direct).epsilon(1e-12));
  const PeriodicGrid g2(10, 1.7);
  const SpectralOps ops2(g2);
  std::vector<double> f2(g2.size());
  direct = 0.0;
  for (auto& v : f2) {
    v = n(rng);
    direct += v * v * g2.cell_volume();
  }
  CHECK(ops2.integral_of_square(ops2.forward(f2)) == doctest::Approx(direct).epsilon(1e-12));
}
