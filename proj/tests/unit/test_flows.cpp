#include <doctest.h>

#include <cmath>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

#include "nsmc/flows.hpp"
#include "nsmc/parallel.hpp"

using namespace nsmc;

namespace {

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

const std::vector<Vec3> kStarts = {Vec3(0.1, 0.2, 0.3), Vec3(1.0, -0.5, 2.0), Vec3(3.0, 3.0, 0.0)};

}  // namespace

TEST_CASE("zero drift without noise leaves points fixed") {
  FlowConfig cfg{0.0, 0.01, 2, 1, true};
  const auto ens = simulate_backward_flow(VectorField(ZeroVector{}), 0.5, kStarts, cfg);
  CHECK(ens.steps == 50);
  for (std::size_t p = 0; p < ens.path_count(); ++p)
    for (int j = 0; j <= ens.steps; ++j) CHECK(ens.position(p, j) == kStarts[p / 2]);
}

TEST_CASE("constant drift integrates exactly") {
  const Vec3 c(0.5, -1.0, 2.0);
  FlowConfig cfg{0.0, 0.01, 1, 1, true};
  const double t = 0.3;
  const auto b = simulate_backward_flow(VectorField(ConstantVector{c}), t, kStarts, cfg);
  const auto f = simulate_forward_flow(VectorField(ConstantVector{c}), t, kStarts, cfg);
  for (std::size_t p = 0; p < kStarts.size(); ++p) {
    CHECK((b.endpoint(p) - (kStarts[p] - c * t)).norm() < 1e-13);
    CHECK((f.endpoint(p) - (kStarts[p] + c * t)).norm() < 1e-13);
  }
}

TEST_CASE("noisy constant drift replays stored increments bit for bit") {
  const Vec3 c(0.5, -1.0, 2.0);
  for (double sign : {1.0, -1.0}) {
    FlowConfig cfg{0.7, 0.01, 4, 3, true, sign};
    const auto b = simulate_backward_flow(VectorField(ConstantVector{c}), 0.2, kStarts, cfg);
    const auto f = simulate_forward_flow(VectorField(ConstantVector{c}), 0.2, kStarts, cfg);
    for (std::size_t p = 0; p < b.path_count(); ++p) {
      Vec3 xb = kStarts[p / 4], xf = kStarts[p / 4];
      for (int j = 0; j < b.steps; ++j) {
        xb += -c * cfg.dt + cfg.sigma * b.increment(p, j);
        xf += c * cfg.dt + sign * cfg.sigma * f.increment(p, j);
      }
      CHECK(b.endpoint(p) == xb);
      CHECK(f.endpoint(p) == xf);
      CHECK((b.endpoint(p) - kStarts[p / 4]).norm() > 0.0);
    }
  }
}

TEST_CASE("time reversal of zero and constant drift") {
  FlowConfig cfg{1.0, 0.01, 5, 9, true};
  const auto f0 = simulate_forward_flow(VectorField(ZeroVector{}), 0.4, kStarts, cfg);
  const auto r0 = invert_by_time_reversal(VectorField(ZeroVector{}), f0);
  const auto fc = simulate_forward_flow(VectorField(ConstantVector{Vec3(1, 2, 3)}), 0.4, kStarts, cfg);
  const auto rc = invert_by_time_reversal(VectorField(ConstantVector{Vec3(1, 2, 3)}), fc);
  for (std::size_t p = 0; p < f0.path_count(); ++p) {
    CHECK((r0.endpoint(p) - kStarts[p / 5]).norm() < 1e-13);
    CHECK((rc.endpoint(p) - kStarts[p / 5]).norm() < 1e-12);
    // Every intermediate step retraces the forward path.
    CHECK((r0.position(p, 10) - f0.position(p, f0.steps - 10)).norm() < 1e-13);
  }
  FlowConfig no_inc = cfg;
  no_inc.store_increments = false;
  const auto fn = simulate_forward_flow(VectorField(ZeroVector{}), 0.4, kStarts, no_inc);
  CHECK_THROWS_AS(invert_by_time_reversal(VectorField(ZeroVector{}), fn), MissingDataError);
}

TEST_CASE("time reversal roundtrip error is first order in dt") {
  const VectorField u(Beltrami{1, 1, 1, 0.5});
  for (double sigma : {0.0, 1.0}) {
    std::vector<double> ldt, lerr;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
      FlowConfig cfg{sigma, dt, 64, 17, true, -1.0};
      const auto f = simulate_forward_flow(u, 0.5, kStarts, cfg);
      const auto r = invert_by_time_reversal(u, f);
      double err = 0.0;
      for (std::size_t p = 0; p < f.path_count(); ++p) err += (r.endpoint(p) - kStarts[p / 64]).norm();
      ldt.push_back(std::log(dt));
      lerr.push_back(std::log(err / f.path_count()));
    }
    const double s = slope(ldt, lerr);
    MESSAGE("sigma " << sigma << " slope " << s);
    CHECK(std::abs(s - 1.0) <= 0.3);
  }
}

TEST_CASE("Jacobian of a gradient-free drift is the identity") {
  FlowConfig cfg{1.0, 0.01, 3, 2, true};
  const auto ens = simulate_backward_flow(VectorField(ConstantVector{Vec3(1, 0, 0)}), 0.3, kStarts, cfg);
  for (const auto& j : simulate_jacobian(VectorField(ConstantVector{Vec3(1, 0, 0)}), ens))
    for (const auto& m : j.eta) CHECK(m == Mat3::Identity());
}

TEST_CASE("Jacobian of a linear drift matches the matrix exponential") {
  Mat3 a;
  a << 0.3, -0.5, 0.2, 0.1, -0.1, 0.4, -0.3, 0.2, -0.2;  // traceless
  const VectorField u(LinearVector{a, Vec3::Zero()});
  const double t = 0.5;
  std::vector<double> ldt, lerr, ldet;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    FlowConfig cfg{0.5, dt, 2, 1, true};
    const auto ens = simulate_backward_flow(u, t, kStarts, cfg);
    const auto jac = simulate_jacobian(u, ens);
    double err = 0.0, det = 0.0;
    for (const auto& jp : jac) {
      for (int j = 0; j <= ens.steps; ++j) {
        const Mat3 exact = (-a * (t - ens.time_at(j))).exp();
        err = std::max(err, (jp.eta[static_cast<std::size_t>(j)] - exact).norm());
        det = std::max(det, std::abs(jp.eta[static_cast<std::size_t>(j)].determinant() - 1.0));
      }
    }
    CHECK(err < 2.0 * dt);
    CHECK(det < 2.0 * dt);
    ldt.push_back(std::log(dt));
    lerr.push_back(std::log(err));
    ldet.push_back(std::log(det));
  }
  CHECK(slope(ldt, lerr) == doctest::Approx(1.0).epsilon(0.15));
  CHECK(slope(ldt, ldet) == doctest::Approx(1.0).epsilon(0.3));
}

TEST_CASE("determinant drift on Beltrami drift is first order") {
  const VectorField u(Beltrami{1, 1, 1, 0.5});
  std::vector<double> ldt, ldet;
  for (double dt : {2e-3, 1e-3, 5e-4}) {
    FlowConfig cfg{1.0, dt, 32, 4, false};
    const auto ens = simulate_backward_flow(u, 0.1, kStarts, cfg);
    const auto jac = simulate_jacobian(u, ens);
    double det = 0.0;
    for (const auto& jp : jac)
      for (const auto& m : jp.eta) det = std::max(det, std::abs(m.determinant() - 1.0));
    ldt.push_back(std::log(dt));
    ldet.push_back(std::log(det));
  }
  CHECK(std::exp(ldet[1]) <= 0.02);
  CHECK(std::abs(slope(ldt, ldet) - 1.0) <= 0.3);
}

TEST_CASE("stochastic integral of the identity is the Brownian increment") {
  FlowConfig cfg{1.0, 0.01, 4, 6, true};
  const auto ens = simulate_backward_flow(VectorField(ZeroVector{}), 0.5, kStarts, cfg);
  const auto jac = simulate_jacobian(VectorField(ZeroVector{}), ens);
  const auto w = stochastic_integral_eta(ens, jac, 0.2);
  for (std::size_t p = 0; p < ens.path_count(); ++p) {
    Vec3 sum = Vec3::Zero();
    for (int j = 0; j < 30; ++j) sum += ens.increment(p, j);
    CHECK((w[p] - sum).norm() < 1e-14);
  }
  for (const Vec3& v : stochastic_integral_eta(ens, jac, 0.5)) CHECK(v.norm() == 0.0);
  CHECK_THROWS_AS(stochastic_integral_eta(ens, jac, 0.7), OutOfRangeError);

  FlowConfig det{0.0, 0.01, 1, 6, true};
  const auto e0 = simulate_backward_flow(VectorField(ZeroVector{}), 0.5, kStarts, det);
  CHECK_THROWS_AS(stochastic_integral_eta(e0, simulate_jacobian(VectorField(ZeroVector{}), e0), 0.1),
                  UnsupportedModeError);
}

TEST_CASE("the Ito integral of eta is centred") {
  const VectorField u(Beltrami{1, 1, 1, 0.5});
  FlowConfig cfg{1.0, 5e-3, 4000, 8, true};
  const std::vector<Vec3> x = {Vec3(0.4, 1.1, 2.0)};
  const auto ens = simulate_backward_flow(u, 0.2, x, cfg);
  const auto w = stochastic_integral_eta(ens, simulate_jacobian(u, ens), 0.0);
  for (int a = 0; a < 3; ++a) {
    double m = 0, m2 = 0;
    for (const auto& v : w) {
      m += v[a];
      m2 += v[a] * v[a];
    }
    m /= w.size();
    const double se = std::sqrt((m2 / w.size() - m * m) / w.size());
    CHECK(std::abs(m) <= 3 * se);
  }
}

TEST_CASE("Lipschitz and drift-perturbation stability under common noise") {
  const VectorField g(Beltrami{1, 1, 1, 0.0});
  const VectorField g1(Beltrami{1.05, 1, 0.95, 0.0});
  const double t = 0.5;
  FlowConfig cfg{1.0, 1e-3, 200, 21, true};
  cfg.shared_noise = true;
  // Measured gradient sup norm (operator norm bound) over a dense sample.
  double lip = 0.0;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      for (int k = 0; k < 20; ++k) {
        const Vec3 x(i * 0.314, j * 0.314, k * 0.314);
        lip = std::max(lip, g.gradient(0, x).operatorNorm());
      }
  for (const auto& [x, y] : {std::pair{Vec3(0.1, 0.2, 0.3), Vec3(0.15, 0.2, 0.3)},
                             std::pair{Vec3(1.0, 2.0, 0.5), Vec3(1.0, 2.1, 0.45)}}) {
    const std::vector<Vec3> pts = {x, y};
    const auto ens = simulate_backward_flow(g, t, pts, cfg);
    double mean = 0.0;
    for (int p = 0; p < cfg.n_paths; ++p) mean += (ens.endpoint(ens.path_index(0, p)) - ens.endpoint(ens.path_index(1, p))).norm();
    CHECK(mean / cfg.n_paths <= (x - y).norm() * std::exp(lip * t));
  }
  const std::vector<Vec3> pts = {Vec3(0.7, 0.1, 1.3)};
  const auto a = simulate_backward_flow(g, t, pts, cfg);
  const auto b = simulate_backward_flow(g1, t, pts, cfg, &a);
  double sup_diff = 0.0;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j)
      for (int k = 0; k < 20; ++k) {
        const Vec3 x(i * 0.314, j * 0.314, k * 0.314);
        sup_diff = std::max(sup_diff, (g.eval(0, x) - g1.eval(0, x)).norm());
      }
  double mean = 0.0;
  for (std::size_t p = 0; p < a.path_count(); ++p) mean += (a.endpoint(p) - b.endpoint(p)).norm();
  CHECK(mean / a.path_count() <= t * sup_diff * std::exp(lip * t));
  CHECK(mean > 0.0);
}

TEST_CASE("escape policy and determinism") {
  FlowConfig cfg{3.0, 0.01, 50, 1, false};
  cfg.escape_radius = 0.5;
  CHECK_THROWS_AS(simulate_backward_flow(VectorField(ZeroVector{}), 1.0, kStarts, cfg), FlowEscapeError);
  cfg.escape_radius = 100.0;
  CHECK_NOTHROW(simulate_backward_flow(VectorField(ZeroVector{}), 1.0, kStarts, cfg));

  const VectorField u(Beltrami{1, 1, 1, 0.5});
  FlowConfig c2{1.0, 0.01, 16, 77, false};
  const int saved = thread_count();
  set_thread_count(1);
  const auto e1 = simulate_backward_flow(u, 0.3, kStarts, c2);
  set_thread_count(3);
  const auto e2 = simulate_backward_flow(u, 0.3, kStarts, c2);
  set_thread_count(saved);
  for (std::size_t p = 0; p < e1.path_count(); ++p) CHECK(e1.endpoint(p) == e2.endpoint(p));
  CHECK_THROWS_AS(simulate_backward_flow(u, 0.305, kStarts, FlowConfig{1.0, 0.01, 1, 0, false}), ConfigError);
}
