#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nsmc/apriori.hpp"
#include "nsmc/config.hpp"
#include "nsmc/errors.hpp"
#include "nsmc/parabolic.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/picard.hpp"
#include "nsmc/poisson.hpp"
#include "nsmc/run.hpp"

namespace py = pybind11;
using namespace nsmc;

namespace {

std::vector<Vec3> to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("points must have shape (n, 3)");
  std::vector<Vec3> out;
  const auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out.emplace_back(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

py::array_t<double> rows(const std::vector<Vec3>& v) {
  py::array_t<double> out({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int a = 0; a < 3; ++a) w(static_cast<py::ssize_t>(i), a) = v[i][a];
  return out;
}

/// (n_times, n, n, n, C) view of a grid series.
template <int C>
py::array_t<double> series_array(const GridSeries<C>& s) {
  const auto n = static_cast<py::ssize_t>(s.grid().n);
  py::array_t<double> out({static_cast<py::ssize_t>(s.time_count()), n, n, n, static_cast<py::ssize_t>(C)});
  std::copy(s.values().begin(), s.values().end(), out.mutable_data());
  return out;
}

py::dict record_dict(const IterationRecord& r) {
  py::dict d;
  d["k"] = r.k;
  d["l"] = r.l;
  d["m"] = r.m;
  d["rho"] = r.rho;
  d["zeta"] = r.zeta;
  d["kappa"] = r.kappa;
  d["inner_iterations"] = r.inner_iterations;
  d["inner_residual"] = r.inner_residual;
  d["max_u_std_err"] = r.max_u_std_err;
  d["div_ratio"] = r.div_ratio;
  return d;
}

}  // namespace

PYBIND11_MODULE(_nsmc, m) {
  m.doc() = "Monte Carlo solvers for the incompressible Navier-Stokes equations";

  // Translators run newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "NsmcError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);

  m.def("thread_count", &thread_count);
  m.def("set_thread_count", &set_thread_count, py::arg("n"));

  py::class_<PeriodicCube>(m, "PeriodicCube")
      .def(py::init([](double side, int grid_n) { return PeriodicCube{side, grid_n}; }),
           py::arg("side") = 2.0 * std::numbers::pi, py::arg("grid_n") = 16)
      .def_readwrite("side", &PeriodicCube::side)
      .def_readwrite("grid_n", &PeriodicCube::grid_n);
  py::class_<WholeSpace>(m, "WholeSpace")
      .def(py::init([](double r) { return WholeSpace{r}; }), py::arg("support_radius") = 1.0)
      .def_readwrite("support_radius", &WholeSpace::support_radius);

  py::class_<VectorField>(m, "VectorField")
      .def("eval", &VectorField::eval, py::arg("t"), py::arg("x"))
      .def("gradient", &VectorField::gradient, py::arg("t"), py::arg("x"));
  py::class_<ScalarField>(m, "ScalarField")
      .def("eval", &ScalarField::eval, py::arg("t"), py::arg("x"))
      .def("gradient", &ScalarField::gradient, py::arg("t"), py::arg("x"));

  m.def("beltrami", [](double a, double b, double c, double nu) { return VectorField(Beltrami{a, b, c, nu}); },
        py::arg("a") = 1.0, py::arg("b") = 1.0, py::arg("c") = 1.0, py::arg("nu") = 0.0);
  m.def("taylor_green", [](double nu) { return VectorField(TaylorGreen{nu}); }, py::arg("nu") = 0.0);
  m.def("constant_vector", [](const Vec3& v) { return VectorField(ConstantVector{v}); }, py::arg("value"));
  m.def("zero_vector", [] { return VectorField(ZeroVector{}); });
  m.def("cosine_mode", [](const Vec3& k, double amp, double phase) { return ScalarField(CosineMode{k, amp, phase}); },
        py::arg("wavevector"), py::arg("amplitude") = 1.0, py::arg("phase") = 0.0);
  m.def("gaussian_bump",
        [](const Vec3& c, double w, double amp) { return ScalarField(GaussianBump{c, w, amp}); },
        py::arg("center"), py::arg("width") = 1.0, py::arg("amplitude") = 1.0);
  m.def("constant_scalar", [](double v) { return ScalarField(ConstantScalar{v}); }, py::arg("value"));
  m.def("zero_scalar", [] { return ScalarField(ZeroScalar{}); });

  py::class_<PoissonConfig>(m, "PoissonConfig")
      .def(py::init([](int n_paths, double dt_bm, double t_max, std::uint64_t seed, bool antithetic) {
             PoissonConfig c{n_paths, dt_bm, t_max, seed, antithetic};
             c.validate();
             return c;
           }),
           py::arg("n_paths") = 8192, py::arg("dt_bm") = 1e-3, py::arg("t_max") = 20.0, py::arg("seed") = 0,
           py::arg("antithetic") = true)
      .def_readwrite("n_paths", &PoissonConfig::n_paths)
      .def_readwrite("dt_bm", &PoissonConfig::dt_bm)
      .def_readwrite("t_max", &PoissonConfig::t_max)
      .def_readwrite("seed", &PoissonConfig::seed)
      .def_readwrite("antithetic", &PoissonConfig::antithetic);

  m.def(
      "pressure_mc",
      [](const ScalarField& gamma, double t, const py::array_t<double>& points, const PoissonConfig& cfg,
         const Domain& domain) {
        const auto xs = to_points(points);
        const auto est = pressure_mc(gamma, t, xs, cfg, domain);
        std::vector<double> value, se, tail;
        for (const auto& e : est) {
          value.push_back(e.value);
          se.push_back(e.std_err);
          tail.push_back(e.tail);
        }
        py::dict d;
        d["value"] = py::array(py::cast(value));
        d["std_err"] = py::array(py::cast(se));
        d["tail"] = py::array(py::cast(tail));
        return d;
      },
      py::arg("gamma"), py::arg("t"), py::arg("points"), py::arg("config") = PoissonConfig{},
      py::arg("domain") = Domain(PeriodicCube{}));
  m.def(
      "grad_pressure_mc",
      [](const ScalarField& gamma, double t, const py::array_t<double>& points, const PoissonConfig& cfg,
         const Domain& domain) {
        const auto xs = to_points(points);
        const auto est = grad_pressure_mc(gamma, t, xs, cfg, domain);
        std::vector<Vec3> value, se;
        for (const auto& e : est) {
          value.push_back(e.value);
          se.push_back(e.std_err);
        }
        py::dict d;
        d["value"] = rows(value);
        d["std_err"] = rows(se);
        return d;
      },
      py::arg("gamma"), py::arg("t"), py::arg("points"), py::arg("config") = PoissonConfig{},
      py::arg("domain") = Domain(PeriodicCube{}));
  m.def(
      "calderon_zygmund_check",
      [](const ScalarField& gamma, double t, const PeriodicCube& domain) {
        const auto r = calderon_zygmund_check(gamma, t, domain);
        return py::make_tuple(r.lhs, r.rhs);
      },
      py::arg("gamma"), py::arg("t") = 0.0, py::arg("domain") = PeriodicCube{});

  m.def(
      "solve_parabolic",
      [](const VectorField& drift, double sigma, const ScalarField& f0, double t_final,
         const py::array_t<double>& points, double dt, int n_paths, std::uint64_t seed, const ScalarField& source) {
        ParabolicProblem prob{drift, sigma, f0, source, t_final, 0.0};
        FlowConfig fc;
        fc.sigma = sigma;
        fc.dt = dt;
        fc.n_paths = n_paths;
        fc.seed = seed;
        fc.store_increments = false;
        const auto r = solve_parabolic(prob, to_points(points), fc);
        return py::make_tuple(py::array(py::cast(r.values)), py::array(py::cast(r.std_errs)));
      },
      py::arg("drift"), py::arg("sigma"), py::arg("f0"), py::arg("t_final"), py::arg("points"), py::arg("dt") = 1e-3,
      py::arg("n_paths") = 4096, py::arg("seed") = 0, py::arg("source") = ScalarField(ZeroScalar{}));

  py::class_<AprioriParams>(m, "AprioriParams")
      .def(py::init([](double K01, double beta0, double C_qm, double C1_qm) {
             AprioriParams p{K01, beta0, C_qm, C1_qm};
             p.validate();
             return p;
           }),
           py::arg("K01"), py::arg("beta0"), py::arg("C_qm") = 1.0, py::arg("C1_qm") = 1.0)
      .def_readwrite("K01", &AprioriParams::K01)
      .def_readwrite("beta0", &AprioriParams::beta0)
      .def_readwrite("C_qm", &AprioriParams::C_qm)
      .def_readwrite("C1_qm", &AprioriParams::C1_qm);
  m.def(
      "solve_bound_odes",
      [](const AprioriParams& p, double t, double ds) {
        const auto s = solve_bound_odes(p, t, ds);
        py::dict d;
        d["s"] = py::array(py::cast(s.s_grid));
        d["alpha"] = py::array(py::cast(s.alpha));
        d["beta"] = py::array(py::cast(s.beta));
        d["T1"] = s.T1;
        d["bounded_on_interval"] = s.bounded_on_interval;
        return d;
      },
      py::arg("params"), py::arg("t"), py::arg("ds") = 1e-3);
  m.def("existence_horizon", &existence_horizon, py::arg("params"), py::arg("ds") = 1e-3);

  py::enum_<Backend>(m, "Backend")
      .value("PAPER_PICARD", Backend::PaperPicard)
      .value("CONSTANTIN_IYER", Backend::ConstantinIyer);

  py::class_<PicardConfig>(m, "PicardConfig")
      .def(py::init<>())
      .def_readwrite("time_grid_n", &PicardConfig::time_grid_n)
      .def_readwrite("grid_n", &PicardConfig::grid_n)
      .def_readwrite("n_paths", &PicardConfig::n_paths)
      .def_readwrite("dt", &PicardConfig::dt)
      .def_readwrite("tol", &PicardConfig::tol)
      .def_readwrite("k_max", &PicardConfig::k_max)
      .def_readwrite("inner_tol", &PicardConfig::inner_tol)
      .def_readwrite("inner_max", &PicardConfig::inner_max)
      .def_readwrite("seed", &PicardConfig::seed)
      .def_readwrite("backend", &PicardConfig::backend)
      .def_readwrite("antithetic", &PicardConfig::antithetic)
      .def_readwrite("q", &PicardConfig::q)
      .def_readwrite("m", &PicardConfig::m);

  m.def(
      "picard_run",
      [](const VectorField& u0, double sigma, double t_final, const PicardConfig& cfg) {
        const NSProblem prob{u0, sigma, t_final, PeriodicCube{}};
        PicardResult r;
        {
          py::gil_scoped_release release;
          r = picard_run(prob, cfg);
        }
        py::list history;
        for (const auto& h : r.history) history.append(record_dict(h));
        py::dict d;
        d["converged"] = r.converged;
        d["k"] = r.state.k;
        d["history"] = history;
        d["times"] = py::array(py::cast(r.state.times));
        d["u"] = series_array(r.state.u);
        d["u_std_err"] = series_array(r.state.u_std_err);
        d["p"] = series_array(r.state.p);
        d["K1"] = py::array(py::cast(r.state.K1));
        d["beta"] = py::array(py::cast(r.state.beta));
        return d;
      },
      py::arg("u0"), py::arg("sigma"), py::arg("t_final"), py::arg("config") = PicardConfig{});

  m.def(
      "parse_config", [](const std::string& text) { return to_yaml(parse_config(text)); }, py::arg("text"),
      "Validates YAML run configuration text and returns it with every key resolved.");
  m.def(
      "run",
      [](const std::string& text, const std::string& output, std::optional<std::uint64_t> seed) {
        auto cfg = parse_config(text);
        cfg.output = output;
        if (seed) cfg.seed = *seed;
        py::gil_scoped_release release;
        return run(cfg);
      },
      py::arg("config_text"), py::arg("output"), py::arg("seed") = py::none(),
      "Runs a configuration like the command-line tool and returns its exit code.");
}
