#include "nsmc/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "nsmc/apriori.hpp"
#include "nsmc/flows.hpp"
#include "nsmc/io.hpp"
#include "nsmc/parabolic.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/poisson.hpp"
#include "nsmc/run.hpp"

namespace nsmc {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec3> random_points(int n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) {
    const double x = u(rng), y = u(rng), z = u(rng);
    out.emplace_back(x, y, z);
  }
  return out;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

Outcome poisson_oracle() {
  const ScalarField gamma(CosineMode{Vec3::UnitX(), 1.0, 0.0});
  const PoissonConfig cfg{8192, 1e-3, 20.0, 1, true};
  const auto xs = random_points(20, 0.0, 2 * kPi, 101);
  const auto p = pressure_mc(gamma, 0.0, xs, cfg);
  int bad = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double err = std::abs(p[i].value - std::cos(xs[i].x()));
    const double tol = 3 * p[i].std_err + 2 * cfg.dt_bm;
    bad += err > tol;
    worst = std::max(worst, err / tol);
  }
  return {bad == 0, "20 points, max error/tolerance " + fmt(worst)};
}

Outcome calderon_zygmund() {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> wave(-7, 7);
  std::uniform_real_distribution<double> phase(0, 2 * kPi);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<CosineMode> modes;
    for (int i = 0; i < 6; ++i) {
      Vec3 k;
      do {
        const double a = wave(rng), b = wave(rng), c = wave(rng);
        k = Vec3(a, b, c);
      } while (k.norm() == 0.0);
      const double amp = normal(rng);
      modes.push_back(CosineMode{k, amp, phase(rng)});
    }
    const ScalarField g(CustomScalar{[modes](double, const Vec3& x) {
                                       double s = 0.0;
                                       for (const auto& m : modes) s += m.amplitude * std::cos(m.wavevector.dot(x) + m.phase);
                                       return s;
                                     },
                                     {}});
    const auto r = calderon_zygmund_check(g, 0.0);
    worst = std::max(worst, std::abs(r.lhs - r.rhs) / r.rhs);
  }
  return {worst <= 1e-8, "10 fields, max relative mismatch " + fmt(worst)};
}

Outcome bel_pressure_gradient() {
  const ScalarField g(GaussianBump{Vec3::Zero(), 0.5, 1.0});
  const WholeSpace ws{5.0};
  const PoissonConfig cfg{2048, 2e-3, 4.0, 11, true};
  PoissonConfig cfg_fd = cfg;
  cfg_fd.seed = 12;
  const auto xs = random_points(10, -1.0, 1.0, 303);
  int bad = 0;
  double worst = 0.0;
  for (const auto& x : xs) {
    const auto bel = grad_pressure_mc(g, 0.0, x, cfg, ws);
    const auto fd = grad_pressure_fd_mc(g, 0.0, x, 1e-3, cfg_fd, ws);
    for (int a = 0; a < 3; ++a) {
      const double tol = 3 * std::hypot(bel.std_err[a], fd.std_err[a]);
      const double err = std::abs(bel.value[a] - fd.value[a]);
      bad += err > tol;
      worst = std::max(worst, err / tol);
    }
  }
  return {bad == 0, "10 points x 3 axes, max difference/tolerance " + fmt(worst)};
}

Outcome flow_reversal() {
  const VectorField u(Beltrami{1, 1, 1, 0.5});
  const std::vector<Vec3> starts = {Vec3(0.1, 0.2, 0.3), Vec3(1.0, -0.5, 2.0), Vec3(3.0, 3.0, 0.0)};
  std::vector<double> ldt, lerr;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    FlowConfig cfg{1.0, dt, 64, 17, true, -1.0};
    const auto f = simulate_forward_flow(u, 0.5, starts, cfg);
    const auto r = invert_by_time_reversal(u, f);
    double err = 0.0;
    for (std::size_t p = 0; p < f.path_count(); ++p) err += (r.endpoint(p) - starts[p / 64]).norm();
    ldt.push_back(std::log(dt));
    lerr.push_back(std::log(err / static_cast<double>(f.path_count())));
  }
  const double s = slope(ldt, lerr);
  return {std::abs(s - 1.0) <= 0.3, "log-log slope " + fmt(s)};
}

Outcome jacobian_volume() {
  const VectorField u(Beltrami{1, 1, 1, 0.5});
  const std::vector<Vec3> starts = {Vec3(0.1, 0.2, 0.3), Vec3(1.0, -0.5, 2.0), Vec3(3.0, 3.0, 0.0)};
  std::vector<double> dev;
  for (double dt : {1e-3, 5e-4}) {
    FlowConfig cfg{1.0, dt, 32, 4, false};
    const auto ens = simulate_backward_flow(u, 0.1, starts, cfg);
    const auto jac = simulate_jacobian(u, ens);
    double d = 0.0;
    for (const auto& jp : jac)
      for (const auto& m : jp.eta) d = std::max(d, std::abs(m.determinant() - 1.0));
    dev.push_back(d);
  }
  const double ratio = dev[1] / dev[0];
  return {dev[0] <= 0.02 && std::abs(ratio - 0.5) <= 0.15,
          "max |det - 1| " + fmt(dev[0]) + " at dt 1e-3, ratio after halving " + fmt(ratio)};
}

Outcome parabolic_heat() {
  const GaussianBump bump{Vec3(0.1, 0, -0.1), 0.5, 2.0};
  const double sigma = 0.8, t = 0.25;
  ParabolicProblem prob{VectorField(ZeroVector{}), sigma, ScalarField(bump), ScalarField(ZeroScalar{}), t, 0.0};
  const auto pts = random_points(20, -0.8, 0.8, 1);
  const auto r = solve_parabolic(prob, pts, FlowConfig{sigma, 0.05, 4000, 3, false});
  const double w2 = bump.width * bump.width + sigma * sigma * t;
  int bad = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double exact = bump.amplitude * std::pow(bump.width * bump.width / w2, 1.5) *
                         std::exp(-(pts[i] - bump.center).squaredNorm() / (2 * w2));
    bad += std::abs(r.values[i] - exact) > 3 * r.std_errs[i];
  }
  // Semigroup: [0, tau] by single-path chaining then [tau, t] vs one stage.
  const VectorField g(Beltrami{});
  const ScalarField f0(CosineMode{Vec3::UnitX(), 1.0, 0.0});
  const double tau = 0.2, t2 = 0.4, dt = 0.01, s2 = 0.7;
  const auto q = random_points(4, -0.5, 0.5, 7);
  const auto one = solve_parabolic(ParabolicProblem{g, s2, f0, ScalarField(ZeroScalar{}), t2, 0.0}, q,
                                   FlowConfig{s2, dt, 4000, 100, false});
  const ScalarField mid = single_path_solution(ParabolicProblem{g, s2, f0, ScalarField(ZeroScalar{}), tau, 0.0},
                                               FlowConfig{s2, dt, 1, 200, false});
  const auto two = solve_parabolic(ParabolicProblem{g, s2, mid, ScalarField(ZeroScalar{}), t2, tau}, q,
                                   FlowConfig{s2, dt, 4000, 300, false});
  int bad_sg = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    bad_sg += std::abs(one.values[i] - two.values[i]) > 3 * std::hypot(one.std_errs[i], two.std_errs[i]);
  return {bad == 0 && bad_sg == 0, "heat kernel misses " + std::to_string(bad) + "/20, semigroup misses " +
                                       std::to_string(bad_sg) + "/4"};
}

Outcome apriori_horizon() {
  double worst = 0.0;
  for (double K : {0.5, 1.0, 2.0}) worst = std::max(worst, std::abs(existence_horizon({K, 0.0, 0.0, 0.0}, 1e-3) - 1.0 / K));
  const double vals[3] = {0.5, 1.0, 2.0};
  double h[3][3][3][3];
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) h[a][b][c][d] = existence_horizon({vals[a], vals[b], vals[c], vals[d]}, 2e-3);
  int violations = 0;
  const double slack = 1e-3;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) {
          if (a < 2) violations += h[a + 1][b][c][d] > h[a][b][c][d] + slack;
          if (b < 2) violations += h[a][b + 1][c][d] > h[a][b][c][d] + slack;
          if (c < 2) violations += h[a][b][c + 1][d] > h[a][b][c][d] + slack;
          if (d < 2) violations += h[a][b][c][d + 1] > h[a][b][c][d] + slack;
        }
  bool halving = true;
  for (double ds : {4e-3, 2e-3, 1e-3}) {
    const AprioriParams p{1.0, 1.0, 1.0, 1.0};
    halving = halving && std::abs(solve_bound_odes(p, 0.1, ds).T1 - solve_bound_odes(p, 0.1, ds / 2).T1) <= 4 * ds;
  }
  return {worst <= 1e-2 && violations == 0 && halving, "Riccati max |T1 - 1/K| " + fmt(worst) + ", monotonicity violations " +
                                                            std::to_string(violations) +
                                                            (halving ? ", step halving ok" : ", step halving failed")};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const fs::path& work) {
  std::vector<RunConfig> runs;
  {
    RunConfig c;
    c.subcommand = Subcommand::Poisson;
    c.seed = 5;
    c.poisson.mc = PoissonConfig{1024, 1e-2, 20.0, 0, true};
    c.poisson.gradient = true;
    runs.push_back(c);
  }
  {
    RunConfig c;
    c.subcommand = Subcommand::Parabolic;
    c.seed = 6;
    c.parabolic.n_paths = 512;
    runs.push_back(c);
  }
  {
    RunConfig c = beltrami_reference_config();
    c.solver.grid_n = 8;
    c.solver.n_paths = 256;
    c.solver.tol = 0.1;
    c.seed = 7;
    runs.push_back(c);
  }
  const int saved = thread_count();
  int compared = 0, differing = 0;
  std::string failure;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::vector<fs::path> dirs;
    for (int threads : {1, 2}) {
      auto c = runs[r];
      c.output = work / ("determinism_" + std::string(to_string(c.subcommand)) + "_t" + std::to_string(threads));
      set_thread_count(threads);
      const int code = run(c);
      if (code != kExitOk) failure += std::string(to_string(c.subcommand)) + " exit " + std::to_string(code) + "; ";
      dirs.push_back(c.output);
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      if (e.path().extension() != ".csv") continue;
      ++compared;
      differing += read_file(e.path()) != read_file(dirs[1] / e.path().filename());
    }
  }
  set_thread_count(saved);
  return {failure.empty() && differing == 0 && compared > 0,
          failure + std::to_string(compared) + " CSV files compared at 1 vs 2 threads, " + std::to_string(differing) +
              " differ"};
}

/// Criteria 7-9 share one reference run.
struct Reference {
  RunConfig cfg;
  SolveReport report;
};

Outcome beltrami_reproduction(const Reference& ref) {
  const auto& r = ref.report;
  const double err = r.rel_sup_error.back();
  const bool ok = r.result.converged && r.kappa_decreasing && err <= 0.05;
  std::string kappas;
  for (const auto& h : r.result.history) kappas += (kappas.empty() ? "" : " ") + fmt(h.kappa);
  return {ok, std::string(r.result.converged ? "converged" : "not converged") + " at k=" +
                  std::to_string(r.result.state.k) + ", kappa [" + kappas + "], relative sup error " + fmt(err) +
                  ", budget 3se+bias " + fmt(3 * r.max_std_err + r.bias)};
}

Outcome weak_residual(const Reference& ref) {
  const auto& s = ref.report.result.state;
  const auto tests = default_test_fields();
  const auto exact = verify_weak_solution(VectorField(Beltrami{1, 1, 1, ref.cfg.problem.viscosity()}), s.times, s.grid,
                                          ref.cfg.problem, tests);
  const auto& w = ref.report.weak;
  double worst = 0.0;
  for (const auto& f : w.per_field) worst = std::max(worst, f.residual / f.budget);
  return {w.within_budget && exact.max_residual <= 1e-6,
          "run residual/budget max " + fmt(worst) + " over 5 fields, exact residual " + fmt(exact.max_residual)};
}

Outcome backend_cross(const Reference& ref) {
  const double t = 0.05;
  const auto xs = random_points(20, 0.0, 2 * kPi, 909);
  auto pc = ref.cfg.solver;
  pc.seed = ref.cfg.seed;
  const auto picard = compute_velocity(ref.report.result.state, ref.cfg.problem, pc, t, xs);
  auto ci_cfg = pc;
  ci_cfg.backend = Backend::ConstantinIyer;
  ci_cfg.n_paths = 1024;
  ci_cfg.seed = pc.seed + 1;
  const auto ci = ci_velocity(ref.cfg.problem, ci_cfg, t, xs);
  const double bias = velocity_bias_estimate(ref.cfg.problem, pc, t) + velocity_bias_estimate(ref.cfg.problem, ci_cfg, t);
  int bad = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      const double tol = 3 * std::hypot(picard.std_err[i][a], ci.std_err[i][a]) + bias;
      const double err = std::abs(picard.value[i][a] - ci.value[i][a]);
      bad += err > tol;
      worst = std::max(worst, err / tol);
    }
  return {bad == 0, "20 points x 3 components, max difference/tolerance " + fmt(worst) + " (bias term " + fmt(bias) + ")"};
}

}  // namespace

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << "  " << r.name << "  " << r.detail << "  (" << fmt(r.seconds)
    << " s)";
  return s.str();
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  fs::create_directories(opts.work_dir);
  auto wanted = [&](int id) { return opts.only.empty() || std::find(opts.only.begin(), opts.only.end(), id) != opts.only.end(); };

  std::optional<Reference> ref;
  auto reference = [&]() -> const Reference& {
    if (!ref) {
      Reference r;
      r.cfg = beltrami_reference_config();
      r.report = solve_and_write(r.cfg, opts.work_dir / "beltrami_reference");
      ref = std::move(r);
    }
    return *ref;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"poisson_oracle", poisson_oracle},
      {"calderon_zygmund", calderon_zygmund},
      {"bel_pressure_gradient", bel_pressure_gradient},
      {"flow_reversal", flow_reversal},
      {"jacobian_volume", jacobian_volume},
      {"parabolic_heat_kernel", parabolic_heat},
      {"beltrami_reproduction", [&] { return beltrami_reproduction(reference()); }},
      {"weak_residual", [&] { return weak_residual(reference()); }},
      {"backend_cross_validation", [&] { return backend_cross(reference()); }},
      {"apriori_horizon", apriori_horizon},
      {"determinism", [&] { return determinism(opts.work_dir); }},
  };

  std::vector<CriterionResult> out;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted(id)) continue;
    CriterionResult r;
    r.id = id;
    r.name = criteria[i].first;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto o = criteria[i].second();
      r.passed = o.passed;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.on_result) opts.on_result(r);
    out.push_back(r);
  }
  return out;
}

}  // namespace nsmc
