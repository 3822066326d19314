#include "nsmc/picard.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "nsmc/errors.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/rng.hpp"
#include "nsmc/spectral.hpp"

namespace nsmc {

// ---------------------------------------------------------------------------
// Problem and configuration
// ---------------------------------------------------------------------------

void NSProblem::validate(int grid_n) const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and >= 0");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw ConfigError("t_final must be finite and > 0");
  nsmc::validate(domain);
  if (!is_periodic(domain)) throw UnsupportedDomainError("the Picard solver needs the periodic cube");
  const PeriodicGrid grid(grid_n, std::get<PeriodicCube>(domain).side);
  double div_sup = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec3 x = grid.point(i);
    const Vec3 v = u0.eval(0.0, x);
    if (!v.allFinite()) throw DataError("u0 is not finite on the grid");
  }
  const ScalarField div = divergence(u0, 0.0, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) div_sup = std::max(div_sup, std::abs(div.eval(0.0, grid.point(i))));
  if (div_sup > 1e-6) throw ConfigError("u0 is not divergence-free: sup |div u0| = " + std::to_string(div_sup));
}

const char* to_string(Backend b) { return b == Backend::PaperPicard ? "paper_picard" : "constantin_iyer"; }

Backend backend_from_string(const std::string& s) {
  if (s == "paper_picard") return Backend::PaperPicard;
  if (s == "constantin_iyer") return Backend::ConstantinIyer;
  throw ConfigError("unknown backend '" + s + "' (expected paper_picard or constantin_iyer)");
}

void PicardConfig::validate() const {
  if (time_grid_n < 2) throw ConfigError("time_grid_n must be >= 2");
  if (grid_n < 4) throw ConfigError("grid_n must be >= 4");
  if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (k_max < 1) throw ConfigError("k_max must be >= 1");
  if (!(inner_tol > 0.0)) throw ConfigError("inner_tol must be > 0");
  if (inner_max < 1) throw ConfigError("inner_max must be >= 1");
  if (!(q > 1.0 && q < 1.5)) throw ConfigError("q must lie in (1, 3/2)");
  if (!(m > 3.0) || !std::isfinite(m)) throw ConfigError("m must be finite and > 3");
}

namespace {

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

int steps_for(double span, double dt, const char* what) {
  const double r = span / dt;
  const long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-6 * std::max(1.0, r)) {
    throw ConfigError(std::string(what) + " is not a multiple of dt");
  }
  return static_cast<int>(n);
}

std::vector<double> time_grid(const NSProblem& prob, const PicardConfig& cfg) {
  auto t = uniform_times(prob.t_final, cfg.time_grid_n);
  steps_for(t[1] - t[0], cfg.dt, "time grid spacing");
  return t;
}

Mat3 mat_at(const GridSeries<9>& s, std::size_t ti, std::size_t node) { return to_mat3(s.at(ti, node)); }

void put(GridSeries<9>& s, std::size_t ti, std::size_t node, const Mat3& m) {
  auto v = s.at(ti, node);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) v[static_cast<std::size_t>(3 * i + k)] = m(i, k);
}

void put(GridSeries<3>& s, std::size_t ti, std::size_t node, const Vec3& x) {
  auto v = s.at(ti, node);
  for (int a = 0; a < 3; ++a) v[static_cast<std::size_t>(a)] = x[a];
}

Vec3 vec_at(const GridSeries<3>& s, std::size_t ti, std::size_t node) {
  auto v = s.at(ti, node);
  return {v[0], v[1], v[2]};
}

/// Time-interpolated sample with a precomputed slice and weight.
template <int C>
void sample_at(const GridSeries<C>& s, std::size_t i0, double w, const Vec3& x, double* out) {
  s.sample_slice(i0, x, out);
  if (w == 0.0) return;
  double up[C];
  s.sample_slice(i0 + 1, x, up);
  for (int c = 0; c < C; ++c) out[c] = (1.0 - w) * out[c] + w * up[c];
}

double lr_mean_norm(const std::vector<double>& mags, double r) {
  double s = 0.0;
  for (double v : mags) s += std::pow(v, r);
  return std::pow(s / static_cast<double>(mags.size()), 1.0 / r);
}

double sup_of(const std::vector<double>& mags) {
  double s = 0.0;
  for (double v : mags) s = std::max(s, v);
  return s;
}

/// Nodal gradient (i, j) = d u_i / d x_j of a sampled slice, spectrally.
std::vector<Mat3> spectral_gradient(const SpectralOps& ops, const std::array<std::vector<double>, 3>& comps) {
  const std::size_t n = ops.grid().size();
  std::vector<Mat3> out(n);
  for (int i = 0; i < 3; ++i) {
    const auto g = ops.gradient(comps[static_cast<std::size_t>(i)]);
    for (int j = 0; j < 3; ++j)
      for (std::size_t node = 0; node < n; ++node) out[node](i, j) = g[static_cast<std::size_t>(j)][node];
  }
  return out;
}

struct PressureSlice {
  std::vector<double> p;
  std::vector<Vec3> grad;
  std::vector<Mat3> hess;
  double discarded_mean = 0.0;
};

PressureSlice solve_pressure(const SpectralOps& ops, std::vector<double> gamma) {
  PressureSlice out;
  out.discarded_mean = ops.mean(gamma);
  for (double& g : gamma) g -= out.discarded_mean;
  const auto sol = ops.poisson(gamma, true);
  const std::size_t n = gamma.size();
  out.p = sol.p;
  out.grad.resize(n);
  out.hess.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.grad[i] = Vec3(sol.grad[0][i], sol.grad[1][i], sol.grad[2][i]);
    const auto& h = sol.hessian;
    out.hess[i] << h[0][i], h[1][i], h[2][i], h[1][i], h[3][i], h[4][i], h[2][i], h[4][i], h[5][i];
  }
  return out;
}

void store_pressure(PicardState& s, std::size_t ti, const PressureSlice& ps, const std::vector<double>& gamma) {
  for (std::size_t node = 0; node < ps.p.size(); ++node) {
    s.p.at(ti, node)[0] = ps.p[node];
    s.gamma.at(ti, node)[0] = gamma[node];
    put(s.grad_p, ti, node, ps.grad[node]);
    put(s.hess_p, ti, node, ps.hess[node]);
  }
}

void fill_norm_trajectories(PicardState& s, const PicardConfig& cfg) {
  const std::size_t n = s.grid.size();
  s.K1.assign(s.times.size(), 0.0);
  s.beta.assign(s.times.size(), 0.0);
  std::vector<double> mags(n);
  for (std::size_t ti = 0; ti < s.times.size(); ++ti) {
    for (std::size_t node = 0; node < n; ++node) mags[node] = mat_at(s.grad_u, ti, node).norm();
    s.K1[ti] = sup_of(mags);
    s.beta[ti] = lr_mean_norm(mags, cfg.q) + lr_mean_norm(mags, cfg.m);
  }
}

// ---------------------------------------------------------------------------
// Path kernel
// ---------------------------------------------------------------------------

/// Interior pressure quadrature node: tau = times[slice], reached after
/// `step` backward steps from the anchor.
struct QuadNode {
  int step = 0;
  std::size_t slice = 0;
  double weight = 0.0;
  double lag = 0.0;  // t - tau
};

/// Backward paths anchored at time t: step count, per-step drift slices,
/// interior quadrature nodes (ascending step) and the endpoint weight.
struct Anchor {
  double t = 0.0;
  int steps = 0;
  std::vector<std::size_t> slice;
  std::vector<double> slice_w;
  std::vector<QuadNode> quad;
  double end_weight = 0.0;
};

Anchor make_anchor(const std::vector<double>& times, double t, double dt) {
  Anchor a;
  a.t = t;
  a.steps = steps_for(t, dt, "anchor time");
  const double tol = 1e-12 * std::max(1.0, t);
  std::vector<double> nodes;
  std::vector<std::size_t> slices;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t - tol) {
      nodes.push_back(times[i]);
      slices.push_back(i);
    }
  }
  nodes.push_back(t);
  // Trapezoid weights on the (possibly non-uniform) node set.
  std::vector<double> w(nodes.size(), 0.0);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double h = nodes[i + 1] - nodes[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  for (std::size_t i = nodes.size() - 1; i-- > 0;) {
    QuadNode q;
    q.slice = slices[i];
    q.lag = t - nodes[i];
    q.step = steps_for(q.lag, dt, "time node offset");
    q.weight = w[i];
    a.quad.push_back(q);
  }
  a.end_weight = w.back();
  // Drift slices: the series is interpolated at theta_m = t - m dt.
  GridSeries<1> probe(PeriodicGrid(4, 1.0), times);
  a.slice.resize(static_cast<std::size_t>(a.steps));
  a.slice_w.resize(static_cast<std::size_t>(a.steps));
  for (int m = 0; m < a.steps; ++m) {
    const double theta = std::max(0.0, t - m * dt);
    probe.locate_time(theta, a.slice[static_cast<std::size_t>(m)], a.slice_w[static_cast<std::size_t>(m)]);
  }
  return a;
}

/// Per-path sample: [0,3) velocity, [3,12) gradient row-major, [12,15) the
/// Constantin-Iyer transported vector eta^T u0(X).
using Sample = Eigen::Matrix<double, 15, 1>;

struct KernelInputs {
  const GridSeries<3>* drift = nullptr;
  const GridSeries<9>* drift_grad = nullptr;
  const GridSeries<3>* grad_p = nullptr;  // slices referenced by the quadrature
  const VectorField* u0 = nullptr;
  double sigma = 0.0;
  double dt = 0.0;
  bool want_jacobian = false;  // needed for both BEL and CI
  bool want_bel = false;
};

Sample run_path(const KernelInputs& in, const Anchor& a, const Vec3& x, const std::vector<Vec3>& gp_x,
                NormalStream* normal, double sign) {
  const double sqdt = std::sqrt(in.dt);
  Vec3 X = x;
  Mat3 eta = Mat3::Identity();
  Vec3 w = Vec3::Zero();
  Vec3 acc_u = Vec3::Zero();
  Mat3 acc_g = Mat3::Zero();
  std::size_t qi = 0;
  for (int m = 0;; ++m) {
    while (qi < a.quad.size() && a.quad[qi].step == m) {
      const QuadNode& q = a.quad[qi];
      Vec3 gp;
      in.grad_p->sample_slice(q.slice, X, gp.data());
      acc_u -= q.weight * gp;
      if (in.want_bel) acc_g -= (q.weight / (in.sigma * q.lag)) * (gp - gp_x[qi]) * w.transpose();
      ++qi;
    }
    if (m == a.steps) break;
    const std::size_t s0 = a.slice[static_cast<std::size_t>(m)];
    const double sw = a.slice_w[static_cast<std::size_t>(m)];
    Vec3 dW = Vec3::Zero();
    if (normal) dW = sign * sqdt * normal->vec3();
    if (in.want_jacobian) {
      double g[9];
      sample_at<9>(*in.drift_grad, s0, sw, X, g);
      Mat3 G;
      G << g[0], g[1], g[2], g[3], g[4], g[5], g[6], g[7], g[8];
      if (in.want_bel) w += eta.transpose() * dW;
      eta -= in.dt * (G * eta);
    }
    Vec3 v;
    sample_at<3>(*in.drift, s0, sw, X, v.data());
    X += -in.dt * v + in.sigma * dW;
  }
  const Vec3 u0x = in.u0->eval(0.0, X);
  acc_u += u0x;
  Sample out;
  out.segment<3>(0) = acc_u;
  if (in.want_bel) {
    acc_g += in.u0->gradient(0.0, X) * eta;
  }
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) out[3 + 3 * i + k] = acc_g(i, k);
  out.segment<3>(12) = in.want_jacobian ? Vec3(eta.transpose() * u0x) : Vec3::Zero();
  return out;
}

struct PointStats {
  Sample mean = Sample::Zero();
  Sample std_err = Sample::Zero();
};

/// Monte Carlo over the paths of one start point, in a fixed order.
PointStats run_point(const KernelInputs& in, const Anchor& a, const Vec3& x, const std::vector<Vec3>& gp_x,
                     int n_paths, bool antithetic, std::uint64_t key_a, std::uint64_t key_b, std::uint64_t point) {
  PointStats st;
  if (in.sigma == 0.0) {
    st.mean = run_path(in, a, x, gp_x, nullptr, 1.0);
    return st;
  }
  const int units = antithetic ? (n_paths + 1) / 2 : n_paths;
  Sample mean = Sample::Zero(), m2 = Sample::Zero();
  for (int u = 0; u < units; ++u) {
    const std::uint64_t key = stream_key(key_a, {key_b, point, static_cast<std::uint64_t>(u)});
    Sample s;
    NormalStream n1(key);
    s = run_path(in, a, x, gp_x, &n1, 1.0);
    if (antithetic) {
      NormalStream n2(key);
      s = 0.5 * (s + run_path(in, a, x, gp_x, &n2, -1.0));
    }
    const Sample d = s - mean;
    mean += d / static_cast<double>(u + 1);
    m2 += d.cwiseProduct(s - mean);
  }
  st.mean = mean;
  if (units > 1) st.std_err = (m2 / (static_cast<double>(units - 1) * units)).cwiseSqrt();
  return st;
}

std::vector<PointStats> run_points(const KernelInputs& in, const Anchor& a, std::span<const Vec3> xs,
                                   const PicardConfig& cfg, std::uint64_t tag, std::uint64_t sub, bool shared = false) {
  std::vector<PointStats> out(xs.size());
  const std::uint64_t key_a = stream_key(cfg.seed, {tag});
  parallel_for(xs.size(), [&](std::size_t i) {
    std::vector<Vec3> gp_x(a.quad.size());
    if (in.want_bel) {
      for (std::size_t q = 0; q < a.quad.size(); ++q) in.grad_p->sample_slice(a.quad[q].slice, xs[i], gp_x[q].data());
    }
    out[i] = run_point(in, a, xs[i], gp_x, cfg.n_paths, cfg.antithetic, key_a, sub, shared ? 0 : i);
  });
  return out;
}

Mat3 grad_part(const Sample& s) {
  Mat3 g;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) g(i, k) = s[3 + 3 * i + k];
  return g;
}

PicardState blank_state(const PeriodicGrid& grid, const std::vector<double>& times) {
  PicardState s;
  s.grid = grid;
  s.times = times;
  s.u = GridSeries<3>(grid, times);
  s.u_std_err = GridSeries<3>(grid, times);
  s.grad_u = GridSeries<9>(grid, times);
  s.grad_u_std_err = GridSeries<9>(grid, times);
  s.p = GridSeries<1>(grid, times);
  s.grad_p = GridSeries<3>(grid, times);
  s.hess_p = GridSeries<9>(grid, times);
  s.gamma = GridSeries<1>(grid, times);
  return s;
}

PeriodicGrid grid_of(const NSProblem& prob, const PicardConfig& cfg) {
  return PeriodicGrid(cfg.grid_n, std::get<PeriodicCube>(prob.domain).side);
}

constexpr std::uint64_t kStepTag = 0x91c;
constexpr std::uint64_t kBelTag = 0xbe1;
constexpr std::uint64_t kVelocityTag = 0x7e1;

}  // namespace

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

PicardState picard_init(const NSProblem& prob, const PicardConfig& cfg) {
  cfg.validate();
  prob.validate(cfg.grid_n);
  const PeriodicGrid grid = grid_of(prob, cfg);
  PicardState s = blank_state(grid, time_grid(prob, cfg));
  s.k = 1;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const Vec3 x = grid.point(node);
    const Vec3 v = prob.u0.eval(0.0, x);
    const Mat3 g = prob.u0.gradient(0.0, x);
    for (std::size_t ti = 0; ti < s.times.size(); ++ti) {
      put(s.u, ti, node, v);
      put(s.grad_u, ti, node, g);
    }
  }
  fill_norm_trajectories(s, cfg);
  return s;
}

PicardState picard_step(const PicardState& state, const NSProblem& prob, const PicardConfig& cfg) {
  cfg.validate();
  const PeriodicGrid& grid = state.grid;
  const std::size_t n = grid.size();
  const SpectralOps ops(grid);
  const bool ci = cfg.backend == Backend::ConstantinIyer;
  const bool bel = !ci && prob.sigma > 0.0;
  PicardState next = blank_state(grid, state.times);
  next.k = state.k + 1;
  next.history = state.history;

  std::vector<Vec3> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = grid.point(i);

  IterationRecord rec;
  rec.k = next.k;

  for (std::size_t j = 0; j < state.times.size(); ++j) {
    std::vector<Vec3> u_new(n);
    std::vector<Mat3> g_new(n);
    std::vector<double> gamma(n);
    if (j == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        u_new[i] = prob.u0.eval(0.0, nodes[i]);
        g_new[i] = prob.u0.gradient(0.0, nodes[i]);
        gamma[i] = nsmc::gamma(mat_at(state.grad_u, 0, i), g_new[i]);
      }
      const PressureSlice ps = solve_pressure(ops, gamma);
      rec.max_gamma_mean = std::max(rec.max_gamma_mean, std::abs(ps.discarded_mean));
      store_pressure(next, 0, ps, gamma);
    } else {
      const Anchor a = make_anchor(state.times, state.times[j], cfg.dt);
      KernelInputs in;
      in.drift = &state.u;
      in.drift_grad = &state.grad_u;
      in.grad_p = &next.grad_p;  // slices < j already hold p^{k+1}
      in.u0 = &prob.u0;
      in.sigma = prob.sigma;
      in.dt = cfg.dt;
      in.want_jacobian = ci || bel;
      in.want_bel = bel;
      // The pressure plays no role in the transported field.
      Anchor a_used = a;
      if (ci) a_used.quad.clear();
      const auto stats = run_points(in, a_used, nodes, cfg, kStepTag, j);

      if (ci) {
        std::array<std::vector<double>, 3> w;
        for (auto& c : w) c.resize(n);
        for (std::size_t i = 0; i < n; ++i)
          for (int c = 0; c < 3; ++c) w[static_cast<std::size_t>(c)][i] = stats[i].mean[12 + c];
        const auto proj = ops.leray(w);
        const auto grads = spectral_gradient(ops, proj);
        for (std::size_t i = 0; i < n; ++i) {
          u_new[i] = Vec3(proj[0][i], proj[1][i], proj[2][i]);
          g_new[i] = grads[i];
          gamma[i] = nsmc::gamma(g_new[i], g_new[i]);
          put(next.u_std_err, j, i, Vec3(stats[i].std_err.segment<3>(12)));
        }
        const PressureSlice ps = solve_pressure(ops, gamma);
        rec.max_gamma_mean = std::max(rec.max_gamma_mean, std::abs(ps.discarded_mean));
        store_pressure(next, j, ps, gamma);
      } else {
        // Fixed parts: transport of u0 and grad u0 minus the pressure
        // integral over the nodes below t_j.
        std::vector<Vec3> A(n);
        std::vector<Mat3> B(n);
        for (std::size_t i = 0; i < n; ++i) {
          A[i] = stats[i].mean.segment<3>(0);
          put(next.u_std_err, j, i, Vec3(stats[i].std_err.segment<3>(0)));
          if (bel) {
            B[i] = grad_part(stats[i].mean);
            put(next.grad_u_std_err, j, i, grad_part(stats[i].std_err));
          }
        }
        if (!bel) {
          std::array<std::vector<double>, 3> comps;
          for (int c = 0; c < 3; ++c) {
            comps[static_cast<std::size_t>(c)].resize(n);
            for (std::size_t i = 0; i < n; ++i) comps[static_cast<std::size_t>(c)][i] = A[i][c];
          }
          B = spectral_gradient(ops, comps);
        }
        const double c_end = a.end_weight;
        for (std::size_t i = 0; i < n; ++i) gamma[i] = nsmc::gamma(mat_at(state.grad_u, j, i), mat_at(state.grad_u, j, i));
        PressureSlice ps;
        int it = 0;
        double resid = std::numeric_limits<double>::infinity();
        while (true) {
          ps = solve_pressure(ops, gamma);
          std::vector<double> next_gamma(n);
          for (std::size_t i = 0; i < n; ++i) {
            g_new[i] = B[i] - c_end * ps.hess[i];
            next_gamma[i] = nsmc::gamma(mat_at(state.grad_u, j, i), g_new[i]);
          }
          resid = 0.0;
          for (std::size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(next_gamma[i] - gamma[i]));
          gamma.swap(next_gamma);
          ++it;
          if (resid < cfg.inner_tol) break;
          if (it >= cfg.inner_max) {
            throw InnerDivergenceError("inner u/p iteration did not contract at t = " + std::to_string(state.times[j]) +
                                           " after " + std::to_string(it) + " iterations (last change " +
                                           std::to_string(resid) + ")",
                                       it, resid);
          }
        }
        // Final solve with the accepted gamma.
        ps = solve_pressure(ops, gamma);
        for (std::size_t i = 0; i < n; ++i) {
          g_new[i] = B[i] - c_end * ps.hess[i];
          u_new[i] = A[i] - c_end * ps.grad[i];
        }
        rec.inner_iterations += it;
        rec.inner_residual = std::max(rec.inner_residual, resid);
        rec.max_gamma_mean = std::max(rec.max_gamma_mean, std::abs(ps.discarded_mean));
        store_pressure(next, j, ps, gamma);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      put(next.u, j, i, u_new[i]);
      put(next.grad_u, j, i, g_new[i]);
    }
  }

  // Distances to the previous iterate.
  std::vector<double> S(n), N(n);
  for (std::size_t j = 0; j < state.times.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      S[i] = (vec_at(next.u, j, i) - vec_at(state.u, j, i)).norm();
      N[i] = (mat_at(next.grad_u, j, i) - mat_at(state.grad_u, j, i)).norm();
    }
    rec.l = std::max(rec.l, sup_of(S));
    rec.m = std::max(rec.m, lr_mean_norm(S, cfg.q));
    rec.rho = std::max(rec.rho, sup_of(N));
    rec.zeta = std::max(rec.zeta, lr_mean_norm(N, cfg.m));
    for (std::size_t i = 0; i < n; ++i) {
      auto se = next.u_std_err.at(j, i);
      rec.max_u_std_err = std::max({rec.max_u_std_err, se[0], se[1], se[2]});
    }
  }
  rec.kappa = rec.rho + rec.zeta + rec.m;
  {
    const std::size_t last = state.times.size() - 1;
    std::array<std::vector<double>, 3> comps;
    for (int c = 0; c < 3; ++c) {
      comps[static_cast<std::size_t>(c)].resize(n);
      for (std::size_t i = 0; i < n; ++i) comps[static_cast<std::size_t>(c)][i] = next.u.at(last, i)[static_cast<std::size_t>(c)];
    }
    const auto div = ops.divergence(comps);
    double d2 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2 += div[i] * div[i];
      g2 += mat_at(next.grad_u, last, i).squaredNorm();
    }
    rec.div_ratio = g2 > 0.0 ? std::sqrt(d2 / g2) : 0.0;
  }
  next.history.push_back(rec);
  fill_norm_trajectories(next, cfg);
  return next;
}

PicardResult picard_run(const NSProblem& prob, const PicardConfig& cfg) {
  PicardResult res;
  PicardState cur = picard_init(prob, cfg);
  PicardState best = cur;
  double best_kappa = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.k_max; ++it) {
    cur = picard_step(cur, prob, cfg);
    const double kappa = cur.history.back().kappa;
    if (kappa < best_kappa) {
      best_kappa = kappa;
      best = cur;
    }
    if (kappa < cfg.tol) {
      res.converged = true;
      best = cur;
      break;
    }
  }
  res.history = cur.history;
  res.state = std::move(best);
  return res;
}

GradVelocityEstimate compute_grad_velocity_bel(const PicardState& state, const NSProblem& prob,
                                               const PicardConfig& cfg, double t, std::span<const Vec3> xs) {
  if (!(prob.sigma > 0.0)) {
    throw UnsupportedModeError("Bismut-Elworthy-Li gradient needs sigma > 0; Euler mode differentiates on the grid");
  }
  const double t_end = state.times.back();
  if (t < -1e-12 || t > t_end * (1 + 1e-12)) throw OutOfRangeError("t outside the state's time grid");
  GradVelocityEstimate out;
  out.value.resize(xs.size());
  out.std_err.resize(xs.size());
  const Anchor a = make_anchor(state.times, t, cfg.dt);
  KernelInputs in;
  in.drift = &state.u;
  in.drift_grad = &state.grad_u;
  in.grad_p = &state.grad_p;
  in.u0 = &prob.u0;
  in.sigma = prob.sigma;
  in.dt = cfg.dt;
  in.want_jacobian = true;
  in.want_bel = true;
  const auto stats = run_points(in, a, xs, cfg, kBelTag, std::bit_cast<std::uint64_t>(t));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double h[9];
    state.hess_p.sample(t, xs[i], h);
    Mat3 H;
    H << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
    out.value[i] = grad_part(stats[i].mean) - a.end_weight * H;
    out.std_err[i] = grad_part(stats[i].std_err);
  }
  return out;
}

VelocityEstimate compute_velocity(const PicardState& state, const NSProblem& prob, const PicardConfig& cfg, double t,
                                  std::span<const Vec3> xs, bool shared_noise) {
  const double t_end = state.times.back();
  if (t < -1e-12 || t > t_end * (1 + 1e-12)) throw OutOfRangeError("t outside the state's time grid");
  VelocityEstimate out;
  out.value.resize(xs.size());
  out.std_err.resize(xs.size());
  const Anchor a = make_anchor(state.times, t, cfg.dt);
  KernelInputs in;
  in.drift = &state.u;
  in.drift_grad = &state.grad_u;
  in.grad_p = &state.grad_p;
  in.u0 = &prob.u0;
  in.sigma = prob.sigma;
  in.dt = cfg.dt;
  const auto stats = run_points(in, a, xs, cfg, kVelocityTag, std::bit_cast<std::uint64_t>(t), shared_noise);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Vec3 gp;
    state.grad_p.sample(t, xs[i], gp.data());
    out.value[i] = Vec3(stats[i].mean.segment<3>(0)) - a.end_weight * gp;
    out.std_err[i] = stats[i].std_err.segment<3>(0);
  }
  return out;
}

VelocityEstimate ci_velocity(const NSProblem& prob, const PicardConfig& cfg, double t, std::span<const Vec3> xs) {
  VelocityEstimate out;
  out.value.resize(xs.size());
  out.std_err.assign(xs.size(), Vec3::Zero());
  if (t == 0.0) {
    for (std::size_t i = 0; i < xs.size(); ++i) out.value[i] = prob.u0.eval(0.0, xs[i]);
    return out;
  }
  NSProblem p = prob;
  p.t_final = t;
  PicardConfig c = cfg;
  c.backend = Backend::ConstantinIyer;
  const auto res = picard_run(p, c);
  const auto& s = res.state;
  const std::size_t last = s.times.size() - 1;
  const SpectralOps ops(s.grid);
  std::array<SpectralOps::Spectrum, 3> spec;
  for (int comp = 0; comp < 3; ++comp) {
    std::vector<double> v(s.grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.u.at(last, i)[static_cast<std::size_t>(comp)];
    spec[static_cast<std::size_t>(comp)] = ops.forward(v);
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (int comp = 0; comp < 3; ++comp) out.value[i][comp] = ops.evaluate(spec[static_cast<std::size_t>(comp)], xs[i]);
    s.u_std_err.sample_slice(last, xs[i], out.std_err[i].data());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weak form
// ---------------------------------------------------------------------------

namespace {

struct TestData {
  std::vector<Vec3> h, lap;
  std::vector<Mat3> grad;
};

TestData sample_test_field(const VectorField& f, const PeriodicGrid& grid) {
  const SpectralOps ops(grid);
  const std::size_t n = grid.size();
  TestData d;
  d.h.resize(n);
  d.lap.resize(n);
  std::array<std::vector<double>, 3> comps;
  for (auto& c : comps) c.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.h[i] = f.eval(0.0, grid.point(i));
    for (int c = 0; c < 3; ++c) comps[static_cast<std::size_t>(c)][i] = d.h[i][c];
  }
  d.grad = spectral_gradient(ops, comps);
  for (int c = 0; c < 3; ++c) {
    const auto l = ops.laplacian(comps[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < n; ++i) d.lap[i][c] = l[i];
  }
  return d;
}

void time_weights(const std::vector<double>& times, std::vector<double>& simpson, std::vector<double>& trap) {
  const std::size_t T = times.size();
  trap.assign(T, 0.0);
  for (std::size_t i = 0; i + 1 < T; ++i) {
    const double h = times[i + 1] - times[i];
    trap[i] += 0.5 * h;
    trap[i + 1] += 0.5 * h;
  }
  simpson = trap;
  if (T >= 3 && (T - 1) % 2 == 0) {
    simpson.assign(T, 0.0);
    for (std::size_t i = 0; i + 2 < T; i += 2) {
      const double h = 0.5 * (times[i + 2] - times[i]);
      simpson[i] += h / 3;
      simpson[i + 1] += 4 * h / 3;
      simpson[i + 2] += h / 3;
    }
  }
}

/// u[ti][node] and se[ti][node]; se may be empty.
WeakSolutionReport weak_core(const std::vector<std::vector<Vec3>>& u, const std::vector<std::vector<Vec3>>& se,
                             const std::vector<double>& times, const PeriodicGrid& grid, const NSProblem& prob,
                             std::span<const VectorField> tests, double eps_u) {
  const std::size_t T = times.size(), n = grid.size();
  const double dv = grid.cell_volume(), nu = prob.viscosity(), t = times.back() - times.front();
  std::vector<double> ws, wt;
  time_weights(times, ws, wt);
  double u_sup = 0.0;
  for (const auto& slice : u)
    for (const auto& v : slice) u_sup = std::max(u_sup, v.norm());
  WeakSolutionReport rep;
  rep.within_budget = true;
  for (const VectorField& hf : tests) {
    const TestData d = sample_test_field(hf, grid);
    double h1 = 0.0, lap1 = 0.0, grad1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h1 += d.h[i].norm() * dv;
      lap1 += d.lap[i].norm() * dv;
      grad1 += d.grad[i].norm() * dv;
    }
    std::vector<double> F(T, 0.0);
    for (std::size_t ti = 0; ti < T; ++ti) {
      double f = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const Vec3& v = u[ti][i];
        f += (nu * v.dot(d.lap[i]) + v.dot(d.grad[i] * v)) * dv;
      }
      F[ti] = f;
    }
    double pair_end = 0.0, pair_start = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pair_end += u[T - 1][i].dot(d.h[i]) * dv;
      pair_start += prob.u0.eval(0.0, grid.point(i)).dot(d.h[i]) * dv;
    }
    double integral = 0.0, integral_trap = 0.0, fmax = 0.0;
    for (std::size_t ti = 0; ti < T; ++ti) {
      integral += ws[ti] * F[ti];
      integral_trap += wt[ti] * F[ti];
      fmax = std::max(fmax, std::abs(F[ti]));
    }
    WeakResidual r;
    r.residual = std::abs(pair_end - pair_start - integral);
    double var = 0.0;
    if (!se.empty()) {
      for (std::size_t ti = 0; ti < T; ++ti) {
        for (std::size_t i = 0; i < n; ++i) {
          const Vec3& v = u[ti][i];
          // d/du of u . grad h . u is (grad h + grad h^T) u.
          Vec3 coef = -ws[ti] * (nu * d.lap[i] + (d.grad[i] + d.grad[i].transpose()) * v);
          if (ti == T - 1) coef += d.h[i];
          var += (coef.cwiseProduct(se[ti][i]) * dv).squaredNorm();
        }
      }
    }
    r.std_err = std::sqrt(var);
    const double roundoff = 1e-9 * (std::abs(pair_end) + std::abs(pair_start) + t * fmax + 1.0);
    r.budget = 3 * r.std_err + eps_u * (h1 + t * (nu * lap1 + 2 * u_sup * grad1)) + std::abs(integral - integral_trap) +
               roundoff;
    r.within_budget = r.residual <= r.budget;
    rep.within_budget = rep.within_budget && r.within_budget;
    rep.max_residual = std::max(rep.max_residual, r.residual);
    rep.per_field.push_back(r);
  }
  return rep;
}

}  // namespace

WeakSolutionReport verify_weak_solution(const PicardState& state, const NSProblem& prob,
                                        std::span<const VectorField> test_fields, const PicardConfig& cfg) {
  const std::size_t T = state.times.size(), n = state.grid.size();
  std::vector<std::vector<Vec3>> u(T, std::vector<Vec3>(n)), se(T, std::vector<Vec3>(n));
  for (std::size_t ti = 0; ti < T; ++ti) {
    for (std::size_t i = 0; i < n; ++i) {
      u[ti][i] = vec_at(state.u, ti, i);
      se[ti][i] = vec_at(state.u_std_err, ti, i);
    }
  }
  const double eps = velocity_bias_estimate(prob, cfg, state.times.back());
  return weak_core(u, se, state.times, state.grid, prob, test_fields, eps);
}

WeakSolutionReport verify_weak_solution(const VectorField& field, const std::vector<double>& times,
                                        const PeriodicGrid& grid, const NSProblem& prob,
                                        std::span<const VectorField> test_fields, double eps_u) {
  const std::size_t T = times.size(), n = grid.size();
  std::vector<std::vector<Vec3>> u(T, std::vector<Vec3>(n));
  for (std::size_t ti = 0; ti < T; ++ti)
    for (std::size_t i = 0; i < n; ++i) u[ti][i] = field.eval(times[ti], grid.point(i));
  return weak_core(u, {}, times, grid, prob, test_fields, eps_u);
}

std::vector<VectorField> default_test_fields() {
  return {
      VectorField(Beltrami{1.0, 1.0, 1.0, 0.0}),
      VectorField(Beltrami{1.0, 0.0, 0.0, 0.0}),
      VectorField(Beltrami{0.0, 1.0, 0.5, 0.0}),
      VectorField(TaylorGreen{0.0}),
      VectorField(CustomVector{
          [](double, const Vec3& x) { return Vec3(std::sin(2 * x.y()), std::sin(2 * x.z()), std::sin(2 * x.x())); },
          [](double, const Vec3& x) {
            Mat3 g = Mat3::Zero();
            g(0, 1) = 2 * std::cos(2 * x.y());
            g(1, 2) = 2 * std::cos(2 * x.z());
            g(2, 0) = 2 * std::cos(2 * x.x());
            return g;
          }}),
  };
}

double velocity_bias_estimate(const NSProblem& prob, const PicardConfig& cfg, double t) {
  const PeriodicGrid grid = grid_of(prob, cfg);
  const SpectralOps ops(grid);
  const std::size_t n = grid.size();
  double U = 0.0, G = 0.0;
  std::array<std::vector<double>, 3> comps;
  for (auto& c : comps) c.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x = grid.point(i);
    const Vec3 v = prob.u0.eval(0.0, x);
    U = std::max(U, v.norm());
    G = std::max(G, prob.u0.gradient(0.0, x).norm());
    for (int c = 0; c < 3; ++c) comps[static_cast<std::size_t>(c)][i] = v[c];
  }
  double S2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    std::array<std::vector<double>, 3> d2;
    for (int c = 0; c < 3; ++c) {
      d2[static_cast<std::size_t>(c)] = ops.derivative(ops.derivative(comps[static_cast<std::size_t>(c)], a), a);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s = std::max(s, Vec3(d2[0][i], d2[1][i], d2[2][i]).norm());
    S2 += s;
  }
  const double h = grid.h();
  return t * (cfg.dt * G * (U * G + prob.viscosity() * S2) + h * h / 8 * G * S2);
}

}  // namespace nsmc
