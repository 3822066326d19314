#include "nsmc/run.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>

#include "nsmc/acceptance.hpp"
#include "nsmc/errors.hpp"
#include "nsmc/io.hpp"
#include "nsmc/parabolic.hpp"
#include "nsmc/parallel.hpp"

namespace nsmc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Rows of comma-separated cells; doubles use the round-trip format.
class Csv {
 public:
  explicit Csv(const std::string& header) : text_(header + "\n") {}

  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((text_ += (first ? "" : ","), text_ += cell(cells), first = false), ...);
    text_ += '\n';
  }

  void write(const fs::path& path) const { write_file_atomic(path, text_); }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::string text_;
};

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json problem_json(const RunConfig& cfg) {
  json p;
  p["field_family"] = cfg.field_family;
  p["sigma"] = cfg.problem.sigma;
  p["viscosity"] = cfg.problem.viscosity();
  p["t_final"] = cfg.problem.t_final;
  if (const auto* c = std::get_if<PeriodicCube>(&cfg.problem.domain)) {
    p["domain"] = {{"type", "periodic_cube"}, {"side", c->side}, {"grid_n", c->grid_n}};
  } else {
    p["domain"] = {{"type", "whole_space"}, {"support_radius", std::get<WholeSpace>(cfg.problem.domain).support_radius}};
  }
  return p;
}

json solver_json(const PicardConfig& c) {
  return {{"grid_n", c.grid_n}, {"time_grid_n", c.time_grid_n}, {"dt", c.dt},           {"n_paths", c.n_paths},
          {"tol", c.tol},       {"k_max", c.k_max},             {"inner_tol", c.inner_tol}, {"inner_max", c.inner_max},
          {"backend", to_string(c.backend)}, {"antithetic", c.antithetic}, {"q", c.q}, {"m", c.m}};
}

json iteration_json(const IterationRecord& r) {
  return {{"k", r.k},
          {"l", r.l},
          {"m", r.m},
          {"rho", r.rho},
          {"zeta", r.zeta},
          {"kappa", r.kappa},
          {"inner_iterations", r.inner_iterations},
          {"inner_residual", r.inner_residual},
          {"max_u_std_err", r.max_u_std_err},
          {"max_gamma_mean", r.max_gamma_mean},
          {"div_ratio", r.div_ratio}};
}

/// Exact Navier-Stokes solution with the given initial field, if known.
std::optional<VectorField> exact_solution(const NSProblem& prob) {
  const auto* fam = prob.u0.family();
  if (!fam) return std::nullopt;
  if (const auto* b = std::get_if<Beltrami>(fam)) {
    if (b->nu != 0.0) return std::nullopt;
    return VectorField(Beltrami{b->a, b->b, b->c, prob.viscosity()});
  }
  if (const auto* tg = std::get_if<TaylorGreen>(fam)) {
    if (tg->nu != 0.0) return std::nullopt;
    return VectorField(TaylorGreen{prob.viscosity()});
  }
  if (std::holds_alternative<ZeroVector>(*fam) || std::holds_alternative<ConstantVector>(*fam)) return prob.u0;
  return std::nullopt;
}

void write_solve_tables(const PicardState& s, const SolveReport& rep, const fs::path& dir) {
  Csv deltas("k,l,m,rho,zeta,kappa,inner_iterations,inner_residual,max_u_std_err,max_gamma_mean,div_ratio");
  for (const auto& r : rep.result.history)
    deltas.row(r.k, r.l, r.m, r.rho, r.zeta, r.kappa, r.inner_iterations, r.inner_residual, r.max_u_std_err,
               r.max_gamma_mean, r.div_ratio);
  deltas.write(dir / "deltas.csv");

  Csv norms("t,K1,beta");
  for (std::size_t j = 0; j < s.times.size(); ++j) norms.row(s.times[j], s.K1[j], s.beta[j]);
  norms.write(dir / "norms.csv");

  write_csv(dir / "velocity.csv", s.u);
  write_binary(dir / "velocity.bin", s.u);
  write_binary(dir / "velocity_std_err.bin", s.u_std_err);
  write_binary(dir / "pressure.bin", s.p);

  Csv slice("ix,iy,x,y,ux,uy,uz,p");
  const std::size_t last = s.times.size() - 1;
  for (int ix = 0; ix < s.grid.n; ++ix)
    for (int iy = 0; iy < s.grid.n; ++iy) {
      const std::size_t i = s.grid.index(ix, iy, 0);
      const Vec3 x = s.grid.point(i);
      const auto u = s.u.at(last, i);
      slice.row(ix, iy, x.x(), x.y(), u[0], u[1], u[2], s.p.at(last, i)[0]);
    }
  slice.write(dir / "slice.csv");

  Csv weak("field,residual,std_err,budget,within_budget");
  for (std::size_t f = 0; f < rep.weak.per_field.size(); ++f) {
    const auto& w = rep.weak.per_field[f];
    weak.row(f, w.residual, w.std_err, w.budget, w.within_budget);
  }
  weak.write(dir / "weak.csv");
}

json run_solve(const RunConfig& cfg, const fs::path& dir, int& code) {
  const auto rep = solve_and_write(cfg, dir);
  json out;
  out["converged"] = rep.result.converged;
  out["k_final"] = rep.result.state.k;
  out["kappa_decreasing"] = rep.kappa_decreasing;
  json it = json::array();
  for (const auto& r : rep.result.history) it.push_back(iteration_json(r));
  out["iterations"] = it;
  json traj = json::array();
  const auto& s = rep.result.state;
  for (std::size_t j = 0; j < s.times.size(); ++j) traj.push_back({{"t", s.times[j]}, {"K1", s.K1[j]}, {"beta", s.beta[j]}});
  out["norm_trajectories"] = traj;
  json budget;
  budget["max_velocity_std_err"] = rep.max_std_err;
  budget["bias_estimate"] = rep.bias;
  budget["bias_model"] = "t [dt G (U G + nu S2) + (h^2 / 8) G S2]";
  budget["velocity_error_budget"] = 3 * rep.max_std_err + rep.bias;
  json rel = json::array();
  for (double e : rep.rel_sup_error) rel.push_back(nan_safe(e));
  budget["relative_sup_error_vs_exact"] = rel;
  json weak = json::array();
  for (const auto& w : rep.weak.per_field)
    weak.push_back({{"residual", w.residual}, {"std_err", w.std_err}, {"budget", w.budget}, {"within_budget", w.within_budget}});
  budget["weak_residuals"] = weak;
  out["error_budget"] = budget;
  out["artifacts"] = {"deltas.csv", "norms.csv", "velocity.csv", "slice.csv", "weak.csv",
                      "velocity.bin", "velocity_std_err.bin", "pressure.bin"};
  code = rep.result.converged ? kExitOk : kExitNotConverged;
  return out;
}

json run_poisson(const RunConfig& cfg, const fs::path& dir) {
  const auto& r = cfg.poisson;
  auto mc = r.mc;
  mc.seed = cfg.seed;
  const auto xs = r.points.resolve(cfg.seed);
  const auto p = pressure_mc(r.gamma, r.t, xs, mc, cfg.problem.domain);
  Csv csv("x,y,z,estimate,std_err,tail");
  int warnings = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    csv.row(xs[i].x(), xs[i].y(), xs[i].z(), p[i].value, p[i].std_err, p[i].tail);
    warnings += p[i].tail_warning;
  }
  csv.write(dir / "pressure.csv");
  json out{{"points", xs.size()}, {"tail_warnings", warnings}, {"artifacts", {"pressure.csv"}}};
  if (r.gradient) {
    const auto g = grad_pressure_mc(r.gamma, r.t, xs, mc, cfg.problem.domain);
    Csv gc("x,y,z,gx,gy,gz,se_x,se_y,se_z");
    for (std::size_t i = 0; i < xs.size(); ++i)
      gc.row(xs[i].x(), xs[i].y(), xs[i].z(), g[i].value.x(), g[i].value.y(), g[i].value.z(), g[i].std_err.x(),
             g[i].std_err.y(), g[i].std_err.z());
    gc.write(dir / "gradient.csv");
    out["artifacts"].push_back("gradient.csv");
  }
  out["config"] = {{"n_paths", mc.n_paths}, {"dt_bm", mc.dt_bm}, {"t_max", mc.t_max}, {"antithetic", mc.antithetic}};
  return out;
}

json run_parabolic(const RunConfig& cfg, const fs::path& dir) {
  const auto& r = cfg.parabolic;
  ParabolicProblem prob{r.drift, cfg.problem.sigma, r.f0, r.source, cfg.problem.t_final, r.t_start};
  FlowConfig fc;
  fc.sigma = cfg.problem.sigma;
  fc.dt = r.dt;
  fc.n_paths = r.n_paths;
  fc.seed = cfg.seed;
  fc.store_increments = false;
  const auto xs = r.points.resolve(cfg.seed);
  const auto res = solve_parabolic(prob, xs, fc);
  Csv csv("x,y,z,value,std_err");
  for (std::size_t i = 0; i < xs.size(); ++i) csv.row(xs[i].x(), xs[i].y(), xs[i].z(), res.values[i], res.std_errs[i]);
  csv.write(dir / "solution.csv");
  return {{"points", xs.size()}, {"config", {{"dt", r.dt}, {"n_paths", r.n_paths}, {"t_start", r.t_start}}},
          {"artifacts", {"solution.csv"}}};
}

json run_apriori(const RunConfig& cfg, const fs::path& dir) {
  const auto& r = cfg.apriori;
  const auto sol = solve_bound_odes(r.params, r.t, r.ds);
  const double horizon = existence_horizon(r.params, r.ds);
  Csv csv("s,alpha,beta");
  for (std::size_t i = 0; i < sol.s_grid.size(); ++i) csv.row(sol.s_grid[i], sol.alpha[i], sol.beta[i]);
  csv.write(dir / "bounds.csv");
  std::cout << "T1 = " << format_double(sol.T1) << "\nhorizon = " << format_double(horizon) << "\n";
  return {{"params", {{"K01", r.params.K01}, {"beta0", r.params.beta0}, {"C_qm", r.params.C_qm}, {"C1_qm", r.params.C1_qm}}},
          {"t", r.t},
          {"ds", r.ds},
          {"T1", nan_safe(sol.T1)},
          {"T1_unbounded", std::isinf(sol.T1)},
          {"bounded_on_interval", sol.bounded_on_interval},
          {"existence_horizon", nan_safe(horizon)},
          {"artifacts", {"bounds.csv"}}};
}

json run_validate(const fs::path& dir, int& code) {
  AcceptanceOptions opts;
  opts.work_dir = dir / "acceptance_work";
  opts.on_result = [](const CriterionResult& r) { std::cout << format_result(r) << std::endl; };
  const auto results = run_acceptance(opts);
  Csv csv("id,name,passed,seconds,detail");
  json arr = json::array();
  bool all = true;
  for (const auto& r : results) {
    std::string detail = r.detail;
    for (char& c : detail)
      if (c == ',' || c == '\n') c = ';';
    csv.row(r.id, r.name, r.passed, r.seconds, detail);
    arr.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
    all = all && r.passed;
  }
  csv.write(dir / "acceptance.csv");
  code = all ? kExitOk : kExitValidation;
  return {{"all_passed", all}, {"criteria", arr}, {"artifacts", {"acceptance.csv"}}};
}

json run_bench(const RunConfig& cfg, const fs::path& dir) {
  auto pc = cfg.solver;
  pc.seed = cfg.seed;
  PointSet ps;
  ps.count = cfg.bench.n_points;
  ps.hi = std::get<PeriodicCube>(cfg.problem.domain).side;
  const auto xs = ps.resolve(cfg.seed);
  const double base = predicted_velocity_std_err(cfg.problem, pc, 1.0) * std::sqrt(static_cast<double>(pc.n_paths));
  Csv csv("n_paths,max_std_err,mean_std_err,k_estimate,wall_s");
  double k_max = 0.0;
  for (int n : cfg.bench.n_paths) {
    pc.n_paths = n;
    const auto t0 = std::chrono::steady_clock::now();
    const auto state = picard_init(cfg.problem, pc);
    const auto v = compute_velocity(state, cfg.problem, pc, cfg.problem.t_final, xs);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double mx = 0.0, mean = 0.0;
    for (const auto& se : v.std_err) {
      mx = std::max(mx, se.maxCoeff());
      mean += se.maxCoeff() / static_cast<double>(v.std_err.size());
    }
    const double k = base > 0.0 ? mx * std::sqrt(static_cast<double>(n)) / base : 0.0;
    k_max = std::max(k_max, k);
    csv.row(n, mx, mean, k, wall);
  }
  csv.write(dir / "bench.csv");
  return {{"k_bench", k_max}, {"k_used_in_validation", kStdErrConstant}, {"artifacts", {"bench.csv"}}};
}

}  // namespace

RunConfig beltrami_reference_config() {
  RunConfig cfg;
  cfg.subcommand = Subcommand::Solve;
  cfg.problem = NSProblem{VectorField(Beltrami{1, 1, 1, 0}), 1.0, 0.1, PeriodicCube{}};
  cfg.field_family = "beltrami";
  cfg.solver.grid_n = 16;
  cfg.solver.n_paths = 4096;
  cfg.seed = 0;
  return cfg;
}

SolveReport solve_and_write(const RunConfig& cfg, const fs::path& dir) {
  auto pc = cfg.solver;
  pc.seed = cfg.seed;
  SolveReport rep;
  rep.result = picard_run(cfg.problem, pc);
  const auto& s = rep.result.state;
  const auto& h = rep.result.history;
  rep.kappa_decreasing = true;
  for (std::size_t i = 1; i < h.size(); ++i) rep.kappa_decreasing = rep.kappa_decreasing && h[i].kappa < h[i - 1].kappa;

  for (double v : s.u_std_err.values()) rep.max_std_err = std::max(rep.max_std_err, v);
  rep.bias = velocity_bias_estimate(cfg.problem, pc, cfg.problem.t_final);
  const auto tests = default_test_fields();
  rep.weak = verify_weak_solution(s, cfg.problem, tests, pc);

  const auto exact = exact_solution(cfg.problem);
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    if (!exact) {
      rep.rel_sup_error.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
      const auto v = s.u.at(j, i);
      const Vec3 e = exact->eval(s.times[j], s.grid.point(i));
      err = std::max(err, (Vec3(v[0], v[1], v[2]) - e).norm());
      scale = std::max(scale, e.norm());
    }
    rep.rel_sup_error.push_back(scale > 0.0 ? err / scale : err);
  }
  fs::create_directories(dir);
  write_solve_tables(s, rep, dir);
  return rep;
}

int run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = cfg.output;
  json manifest;
  manifest["artifact"] = "nsmc";
  manifest["version"] = kArtifactVersion;
  manifest["subcommand"] = to_string(cfg.subcommand);
  manifest["seed"] = cfg.seed;
  manifest["threads"] = thread_count();
  manifest["config_text"] = cfg.source_text;
  std::string resolved;
  try {
    resolved = to_yaml(cfg);
    manifest["resolved_config"] = resolved;
  } catch (const ConfigError& e) {
    manifest["resolved_config"] = nullptr;
  }
  manifest["problem"] = problem_json(cfg);
  manifest["solver"] = solver_json(cfg.solver);
  int code = kExitOk;
  try {
    fs::create_directories(dir);
    if (!resolved.empty()) write_file_atomic(dir / "config.yaml", resolved);
    cfg.validate();
    json result;
    switch (cfg.subcommand) {
      case Subcommand::Solve: result = run_solve(cfg, dir, code); break;
      case Subcommand::Poisson: result = run_poisson(cfg, dir); break;
      case Subcommand::Parabolic: result = run_parabolic(cfg, dir); break;
      case Subcommand::Apriori: result = run_apriori(cfg, dir); break;
      case Subcommand::Validate: result = run_validate(dir, code); break;
      case Subcommand::Bench: result = run_bench(cfg, dir); break;
    }
    manifest["result"] = result;
    manifest["status"] = code == kExitOk ? "ok" : code == kExitNotConverged ? "not_converged" : "validation_failed";
  } catch (const ConfigError& e) {
    code = kExitValidation;
    manifest["status"] = "invalid_config";
    manifest["error"] = e.what();
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    code = kExitError;
    manifest["status"] = "error";
    manifest["error"] = e.what();
    std::cerr << "error: " << e.what() << "\n";
  }
  manifest["exit_code"] = code;
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    fs::create_directories(dir);
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "could not write manifest: " << e.what() << "\n";
    if (code == kExitOk) code = kExitError;
  }
  return code;
}

}  // namespace nsmc
