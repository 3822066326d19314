#include "nsmc/flows.hpp"

#include <cmath>
#include <string>

#include "nsmc/errors.hpp"
#include "nsmc/io.hpp"
#include "nsmc/parallel.hpp"
#include "nsmc/rng.hpp"

namespace nsmc {

void FlowConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("flow sigma must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("flow dt must be > 0");
  if (n_paths < 1) throw ConfigError("flow n_paths must be >= 1");
  if (noise_sign != 1.0 && noise_sign != -1.0) throw ConfigError("flow noise_sign must be +1 or -1");
  if (escape_radius < 0.0) throw ConfigError("escape_radius must be >= 0");
}

const Vec3& FlowEnsemble::increment(std::size_t path, int step) const {
  if (!has_increments) throw MissingDataError("flow ensemble was built without stored increments");
  return increments_[path * steps + step];
}

std::size_t FlowEnsemble::escaped_count() const {
  std::size_t n = 0;
  for (char c : escaped_) n += c != 0;
  return n;
}

void FlowEnsemble::allocate(bool with_increments) {
  positions_.assign(path_count() * static_cast<std::size_t>(steps + 1), Vec3::Zero());
  increments_.assign(with_increments ? path_count() * static_cast<std::size_t>(steps) : 0, Vec3::Zero());
  escaped_.assign(path_count(), 0);
  has_increments = with_increments;
}

namespace {

int step_count(double t, double dt) {
  if (!(t >= 0.0)) throw ConfigError("flow horizon must be >= 0");
  const double r = t / dt;
  const long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-6 * std::max(1.0, r)) {
    throw ConfigError("flow horizon " + std::to_string(t) + " is not a multiple of dt " + std::to_string(dt));
  }
  return static_cast<int>(n);
}

FlowEnsemble simulate(const VectorField& u, double t, std::span<const Vec3> xs, const FlowConfig& cfg,
                      const FlowEnsemble* noise, FlowDirection dir) {
  cfg.validate();
  FlowEnsemble ens;
  ens.direction = dir;
  ens.steps = step_count(t, cfg.dt);
  ens.dt = cfg.dt;
  ens.t_start = dir == FlowDirection::BackwardPsi ? t : 0.0;
  ens.t_end = dir == FlowDirection::BackwardPsi ? 0.0 : t;
  ens.sigma = cfg.sigma;
  ens.noise_sign = cfg.noise_sign;
  ens.n_points = static_cast<int>(xs.size());
  ens.n_paths = cfg.n_paths;
  if (noise) {
    if (!noise->has_increments) throw MissingDataError("noise source ensemble has no stored increments");
    if (noise->steps != ens.steps || noise->n_points != ens.n_points || noise->n_paths != ens.n_paths) {
      throw ConfigError("noise source ensemble shape does not match");
    }
  }
  const bool keep = cfg.store_increments || noise != nullptr;
  ens.allocate(keep);
  const double sqdt = std::sqrt(cfg.dt);
  const double drift_sign = dir == FlowDirection::BackwardPsi ? -1.0 : 1.0;
  const double noise_scale = cfg.sigma * (dir == FlowDirection::BackwardPsi ? 1.0 : cfg.noise_sign);
  auto& escaped = ens.escaped_flags();
  parallel_for(ens.path_count(), [&](std::size_t p) {
    const auto point = static_cast<std::uint64_t>(p / static_cast<std::size_t>(cfg.n_paths));
    const auto path = static_cast<std::uint64_t>(p % static_cast<std::size_t>(cfg.n_paths));
    NormalStream normal(stream_key(cfg.seed, {0xf10u, cfg.shared_noise ? 0u : point, path}));
    Vec3 x = xs[point];
    ens.position(p, 0) = x;
    for (int j = 0; j < ens.steps; ++j) {
      Vec3 dw;
      if (noise) {
        dw = noise->increment(p, j);
      } else if (cfg.sigma > 0.0) {
        dw = sqdt * normal.vec3();
      } else {
        dw = Vec3::Zero();
      }
      if (keep) ens.increment_ref(p, j) = dw;
      if (!escaped[p]) {
        x += drift_sign * u.eval(ens.time_at(j), x) * cfg.dt + noise_scale * dw;
        if (cfg.escape_radius > 0.0 && x.norm() > cfg.escape_radius) escaped[p] = 1;
      }
      ens.position(p, j + 1) = x;
    }
  });
  if (static_cast<double>(ens.escaped_count()) > 0.01 * static_cast<double>(ens.path_count())) {
    throw FlowEscapeError(std::to_string(ens.escaped_count()) + " of " + std::to_string(ens.path_count()) +
                          " paths left the bounding ball (limit 1%)");
  }
  return ens;
}

}  // namespace

FlowEnsemble simulate_backward_flow(const VectorField& u, double t, std::span<const Vec3> xs, const FlowConfig& cfg,
                                    const FlowEnsemble* noise) {
  return simulate(u, t, xs, cfg, noise, FlowDirection::BackwardPsi);
}

FlowEnsemble simulate_forward_flow(const VectorField& u, double t, std::span<const Vec3> ys, const FlowConfig& cfg,
                                   const FlowEnsemble* noise) {
  return simulate(u, t, ys, cfg, noise, FlowDirection::ForwardPhi);
}

FlowEnsemble invert_by_time_reversal(const VectorField& u, const FlowEnsemble& fwd) {
  if (fwd.direction != FlowDirection::ForwardPhi) throw ConfigError("time reversal expects a forward ensemble");
  if (!fwd.has_increments) throw MissingDataError("time reversal needs stored increments");
  FlowEnsemble ens;
  ens.direction = FlowDirection::BackwardPsi;
  ens.steps = fwd.steps;
  ens.dt = fwd.dt;
  ens.t_start = fwd.t_end;
  ens.t_end = fwd.t_start;
  ens.sigma = fwd.sigma;
  ens.noise_sign = fwd.noise_sign;
  ens.n_points = fwd.n_points;
  ens.n_paths = fwd.n_paths;
  ens.allocate(true);
  const int n = fwd.steps;
  parallel_for(ens.path_count(), [&](std::size_t p) {
    Vec3 x = fwd.endpoint(p);
    ens.position(p, 0) = x;
    for (int j = 0; j < n; ++j) {
      // Backward step j undoes forward step n-1-j: the forward noise
      // s sigma dW enters with the opposite sign.
      const Vec3 dw = -fwd.noise_sign * fwd.increment(p, n - 1 - j);
      ens.increment_ref(p, j) = dw;
      x += -u.eval(ens.time_at(j), x) * ens.dt + ens.sigma * dw;
      ens.position(p, j + 1) = x;
    }
  });
  return ens;
}

std::vector<JacobianPath> simulate_jacobian(const VectorField& u, const FlowEnsemble& ens) {
  std::vector<JacobianPath> out(ens.path_count());
  const double sign = ens.direction == FlowDirection::BackwardPsi ? -1.0 : 1.0;
  parallel_for(ens.path_count(), [&](std::size_t p) {
    auto& eta = out[p].eta;
    eta.resize(static_cast<std::size_t>(ens.steps + 1));
    eta[0] = Mat3::Identity();
    for (int j = 0; j < ens.steps; ++j) {
      const Mat3 g = u.gradient(ens.time_at(j), ens.position(p, j));
      eta[static_cast<std::size_t>(j + 1)] = eta[static_cast<std::size_t>(j)] + sign * ens.dt * g * eta[static_cast<std::size_t>(j)];
    }
  });
  return out;
}

std::vector<Vec3> stochastic_integral_eta(const FlowEnsemble& ens, const std::vector<JacobianPath>& jac, double tau) {
  if (ens.direction != FlowDirection::BackwardPsi) throw ConfigError("stochastic integral expects a backward ensemble");
  if (!(ens.sigma > 0.0)) throw UnsupportedModeError("Bismut-Elworthy-Li weight needs sigma > 0; use finite differences");
  if (!ens.has_increments) throw MissingDataError("stochastic integral needs stored increments");
  if (jac.size() != ens.path_count()) throw ConfigError("Jacobian paths do not match the ensemble");
  const double lo = std::min(ens.t_start, ens.t_end);
  if (tau < lo - 1e-12 || tau > ens.t_start + 1e-12) throw OutOfRangeError("tau outside the ensemble time range");
  const int m = static_cast<int>(std::lround((ens.t_start - tau) / ens.dt));
  std::vector<Vec3> out(ens.path_count(), Vec3::Zero());
  for (std::size_t p = 0; p < out.size(); ++p) {
    Vec3 acc = Vec3::Zero();
    for (int j = 0; j < m; ++j) acc += jac[p].eta[static_cast<std::size_t>(j)].transpose() * ens.increment(p, j);
    out[p] = acc;
  }
  return out;
}

void write_paths_csv(const std::filesystem::path& path, const FlowEnsemble& ens) {
  std::string out = "path_id,step,theta,x,y,z\n";
  for (std::size_t p = 0; p < ens.path_count(); ++p) {
    for (int j = 0; j <= ens.steps; ++j) {
      const Vec3& x = ens.position(p, j);
      out += std::to_string(p) + ',' + std::to_string(j) + ',' + format_double(ens.time_at(j)) + ',' +
             format_double(x.x()) + ',' + format_double(x.y()) + ',' + format_double(x.z()) + '\n';
    }
  }
  write_file_atomic(path, out);
}

}  // namespace nsmc
