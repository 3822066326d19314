#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nsmc/parabolic.hpp"

using namespace nsmc;

namespace {

std::vector<Vec3> random_points(int n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

}  // namespace

TEST_CASE("heat kernel widens a Gaussian") {
  const GaussianBump bump{Vec3(0.1, 0, -0.1), 0.5, 2.0};
  const double sigma = 0.8, t = 0.25;
  ParabolicProblem prob{VectorField(ZeroVector{}), sigma, ScalarField(bump), ScalarField(ZeroScalar{}), t, 0.0};
  const auto pts = random_points(20, -0.8, 0.8, 1);
  const auto r = solve_parabolic(prob, pts, FlowConfig{sigma, 0.05, 4000, 3, false});
  const double w2 = bump.width * bump.width + sigma * sigma * t;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double exact = bump.amplitude * std::pow(bump.width * bump.width / w2, 1.5) *
                         std::exp(-(pts[i] - bump.center).squaredNorm() / (2 * w2));
    CHECK(std::abs(r.values[i] - exact) <= 3 * r.std_errs[i]);
  }
}

TEST_CASE("constant source accumulates linearly") {
  ParabolicProblem prob{VectorField(Beltrami{}), 1.0, ScalarField(ZeroScalar{}), ScalarField(ConstantScalar{0.75}), 0.4,
                        0.0};
  const auto pts = random_points(3, 0, 6, 2);
  const auto r = solve_parabolic(prob, pts, FlowConfig{1.0, 0.01, 50, 1, false});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(r.values[i] == doctest::Approx(-0.75 * 0.4).epsilon(1e-12));
    CHECK(r.std_errs[i] < 1e-12);
  }
}

TEST_CASE("affine data is invariant without drift") {
  const ScalarField f0(CustomScalar{[](double, const Vec3& x) { return 1.0 + 2 * x.x() - x.y() + 0.5 * x.z(); }, {}});
  ParabolicProblem prob{VectorField(ZeroVector{}), 1.2, f0, ScalarField(ZeroScalar{}), 0.5, 0.0};
  const auto pts = random_points(5, -1, 1, 3);
  const auto r = solve_parabolic(prob, pts, FlowConfig{1.2, 0.05, 2000, 4, false});
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(std::abs(r.values[i] - f0.eval(0, pts[i])) <= 3 * r.std_errs[i]);
}

TEST_CASE("vector heat equation on Beltrami data decays exponentially") {
  const double sigma = 1.0, t = 0.2;
  VectorParabolicProblem prob{VectorField(ZeroVector{}), sigma, VectorField(Beltrami{}), VectorField(ZeroVector{}), t,
                              0.0};
  const auto pts = random_points(6, 0, 6, 5);
  const auto r = solve_parabolic(prob, pts, FlowConfig{sigma, 0.05, 3000, 6, false});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 exact = std::exp(-0.5 * sigma * sigma * t) * VectorField(Beltrami{}).eval(0, pts[i]);
    for (int a = 0; a < 3; ++a) CHECK(std::abs(r.values[i][a] - exact[a]) <= 3 * r.std_errs[i][a]);
  }
}

TEST_CASE("two chained stages agree with one stage") {
  struct Case {
    VectorField g;
    ScalarField f0;
    ScalarField src;
  };
  const std::vector<Case> corpus = {
      {VectorField(ZeroVector{}), ScalarField(GaussianBump{Vec3::Zero(), 0.6, 1.0}), ScalarField(ZeroScalar{})},
      {VectorField(Beltrami{}), ScalarField(CosineMode{Vec3::UnitX(), 1.0, 0.0}), ScalarField(ZeroScalar{})},
      {VectorField(TaylorGreen{0.1}), ScalarField(CosineMode{Vec3(1, 1, 0), 1.0, 0.5}), ScalarField(ConstantScalar{0.3})},
      {VectorField(ConstantVector{Vec3(1, -1, 0.5)}), ScalarField(GaussianBump{Vec3(0.2, 0, 0), 0.4, 2.0}),
       ScalarField(CosineMode{Vec3::UnitZ(), 0.5, 0.0})},
      {VectorField(RigidRotation{Vec3(0, 0, 1)}), ScalarField(GaussianBump{Vec3(0.5, 0, 0), 0.5, 1.0}),
       ScalarField(ZeroScalar{})},
  };
  const double sigma = 0.7, tau = 0.2, t = 0.4, dt = 0.01;
  const auto pts = random_points(4, -0.5, 0.5, 7);
  int c_idx = 0;
  for (const auto& c : corpus) {
    ParabolicProblem one{c.g, sigma, c.f0, c.src, t, 0.0};
    const auto r1 = solve_parabolic(one, pts, FlowConfig{sigma, dt, 4000, 100u + c_idx, false});
    ParabolicProblem first{c.g, sigma, c.f0, c.src, tau, 0.0};
    const ScalarField mid = single_path_solution(first, FlowConfig{sigma, dt, 1, 200u + c_idx, false});
    ParabolicProblem second{c.g, sigma, mid, c.src, t, tau};
    const auto r2 = solve_parabolic(second, pts, FlowConfig{sigma, dt, 4000, 300u + c_idx, false});
    for (std::size_t i = 0; i < pts.size(); ++i) {
      INFO("case " << c_idx << " point " << i << ": " << r1.values[i] << " vs " << r2.values[i]);
      CHECK(std::abs(r1.values[i] - r2.values[i]) <= 3 * std::hypot(r1.std_errs[i], r2.std_errs[i]));
    }
    ++c_idx;
  }
}

TEST_CASE("independent seeds agree within their errors") {
  ParabolicProblem prob{VectorField(Beltrami{}), 1.0, ScalarField(CosineMode{Vec3(0, 1, 1), 1.0, 0.2}),
                        ScalarField(ZeroScalar{}), 0.3, 0.0};
  const auto pts = random_points(10, 0, 6, 8);
  const auto a = solve_parabolic(prob, pts, FlowConfig{1.0, 0.01, 2000, 1, false});
  const auto b = solve_parabolic(prob, pts, FlowConfig{1.0, 0.01, 2000, 2, false});
  // Joint test over all points: sum of squared z-scores vs the chi^2(10) 0.999 quantile.
  double chi2 = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    chi2 += std::pow((a.values[i] - b.values[i]) / std::hypot(a.std_errs[i], b.std_errs[i]), 2);
  CHECK(chi2 < 29.59);
}

TEST_CASE("weak pairing of unit data is the volume") {
  const PeriodicGrid grid(6, 2 * std::numbers::pi);
  ParabolicProblem prob{VectorField(Beltrami{}), 1.0, ScalarField(ConstantScalar{1.0}), ScalarField(ZeroScalar{}), 0.2,
                        0.0};
  const auto w = weak_pairing(prob, ScalarField(ConstantScalar{1.0}), grid, FlowConfig{1.0, 0.02, 8, 3, false});
  CHECK(w.backward == doctest::Approx(grid.volume()).epsilon(1e-12));
  CHECK(w.forward == doctest::Approx(grid.volume()).epsilon(1e-12));
}

TEST_CASE("weak pairing: both estimators agree") {
  const PeriodicGrid grid(8, 2 * std::numbers::pi);
  for (const VectorField& g : {VectorField(ZeroVector{}), VectorField(Beltrami{})}) {
    ParabolicProblem prob{g, 1.0, ScalarField(CosineMode{Vec3::UnitX(), 1.0, 0.0}), ScalarField(ZeroScalar{}), 0.3,
                          0.0};
    const auto w = weak_pairing(prob, ScalarField(CosineMode{Vec3::UnitX(), 1.0, 0.0}), grid,
                                FlowConfig{1.0, 0.01, 200, 5, false});
    INFO("backward " << w.backward << " +- " << w.backward_se << ", forward " << w.forward << " +- " << w.forward_se);
    CHECK(std::abs(w.backward - w.forward) <= 3 * std::hypot(w.backward_se, w.forward_se));
  }
  // u = 0: heat-smoothed pairing e^{-sigma^2 t / 2} * Vol / 2 as an extra anchor.
  ParabolicProblem heat{VectorField(ZeroVector{}), 1.0, ScalarField(CosineMode{Vec3::UnitX(), 1.0, 0.0}),
                        ScalarField(ZeroScalar{}), 0.3, 0.0};
  const auto w = weak_pairing(heat, ScalarField(CosineMode{Vec3::UnitX(), 1.0, 0.0}), grid,
                              FlowConfig{1.0, 0.01, 200, 6, false});
  const double exact = std::exp(-0.5 * 0.3) * grid.volume() / 2;
  CHECK(std::abs(w.backward - exact) <= 3 * w.backward_se + 1e-10);
  CHECK(std::abs(w.forward - exact) <= 3 * w.forward_se + 1e-10);
}

TEST_CASE("divergence-free transport preserves integrals") {
  const PeriodicGrid grid(8, 2 * std::numbers::pi);
  const ScalarField f0(CustomScalar{[](double, const Vec3& x) { return 2.0 + std::cos(x.x()) * std::sin(x.y()); }, {}});
  ParabolicProblem prob{VectorField(Beltrami{}), 1.0, f0, ScalarField(ZeroScalar{}), 0.3, 0.0};
  const auto w = weak_pairing(prob, ScalarField(ConstantScalar{1.0}), grid, FlowConfig{1.0, 0.01, 200, 9, false});
  CHECK(std::abs(w.backward - 2.0 * grid.volume()) <= 3 * w.backward_se + 1e-9);
}
