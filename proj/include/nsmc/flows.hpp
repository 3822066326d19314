#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nsmc/fields.hpp"

namespace nsmc {

struct FlowConfig {
  double sigma = 1.0;  // noise amplitude; nu = sigma^2 / 2
  double dt = 1e-3;
  int n_paths = 1;
  std::uint64_t seed = 0;
  bool store_increments = true;
  /// Sign s of the noise in the forward flow dphi = u dt + s sigma dw.
  double noise_sign = 1.0;
  /// Draw the same noise for every start point (common random numbers).
  bool shared_noise = false;
  /// Whole-space bounding radius; paths leaving it are frozen and flagged.
  /// Zero disables the check.
  double escape_radius = 0.0;

  void validate() const;
};

enum class FlowDirection { BackwardPsi, ForwardPhi };

/// Paths of a stochastic flow for a batch of start points.
///
/// Backward ensembles run in the time variable theta from t_start = t down
/// to t_end = 0:  X_{j+1} = X_j - u(theta_j, X_j) dt + sigma dW_j,
/// theta_j = t - j dt, X_0 = x, so X_j approximates psi_{t, theta_j}(x).
/// Forward ensembles run from t_start = 0 up to t_end = t:
/// X_{j+1} = X_j + u(t_j, X_j) dt + s sigma dW_j.
/// dW_j are standard Brownian increments (variance dt).
class FlowEnsemble {
 public:
  FlowDirection direction = FlowDirection::BackwardPsi;
  double t_start = 0.0;
  double t_end = 0.0;
  double dt = 0.0;
  int steps = 0;
  double sigma = 0.0;
  double noise_sign = 1.0;
  int n_points = 0;
  int n_paths = 0;
  bool has_increments = false;

  std::size_t path_index(int point, int path) const { return static_cast<std::size_t>(point) * n_paths + path; }
  std::size_t path_count() const { return static_cast<std::size_t>(n_points) * n_paths; }

  /// Time variable at step j (theta_j backward, t_j forward).
  double time_at(int step) const {
    return direction == FlowDirection::BackwardPsi ? t_start - step * dt : t_start + step * dt;
  }

  const Vec3& position(std::size_t path, int step) const { return positions_[path * (steps + 1) + step]; }
  Vec3& position(std::size_t path, int step) { return positions_[path * (steps + 1) + step]; }
  const Vec3& endpoint(std::size_t path) const { return position(path, steps); }
  const Vec3& increment(std::size_t path, int step) const;
  Vec3& increment_ref(std::size_t path, int step) { return increments_[path * steps + step]; }

  bool escaped(std::size_t path) const { return escaped_[path] != 0; }
  std::size_t escaped_count() const;

  void allocate(bool with_increments);
  std::vector<char>& escaped_flags() { return escaped_; }

 private:
  std::vector<Vec3> positions_;
  std::vector<Vec3> increments_;
  std::vector<char> escaped_;
};

/// Per-path Jacobian eta along an ensemble; eta[0] = I at the anchor.
struct JacobianPath {
  std::vector<Mat3> eta;
};

/// Backward flow psi_{t, .}(x) for every x in xs. When `noise` is given,
/// its stored increments drive the new ensemble (same shape required).
FlowEnsemble simulate_backward_flow(const VectorField& u, double t, std::span<const Vec3> xs, const FlowConfig& cfg,
                                    const FlowEnsemble* noise = nullptr);

/// Forward flow phi_{0, .}(y) for every y in ys.
FlowEnsemble simulate_forward_flow(const VectorField& u, double t, std::span<const Vec3> ys, const FlowConfig& cfg,
                                   const FlowEnsemble* noise = nullptr);

/// Backward ensemble started from the endpoints of a forward ensemble and
/// driven by its reversed, sign-adjusted increments, so that step j tracks
/// forward step steps - j. Raises MissingDataError without increments.
FlowEnsemble invert_by_time_reversal(const VectorField& u, const FlowEnsemble& fwd);

/// Explicit Euler for the Jacobian along every path. Backward ensembles:
/// eta_{j+1} = eta_j - grad u(theta_j, X_j) eta_j dt; forward ensembles use
/// the + sign.
std::vector<JacobianPath> simulate_jacobian(const VectorField& u, const FlowEnsemble& ens);

/// Left-point Ito sum  sum_{theta_j in (tau, t]} eta_j^T dW_j  for every
/// path of a backward ensemble: the Bismut-Elworthy-Li weight direction.
/// Raises UnsupportedModeError when sigma = 0 and MissingDataError without
/// increments.
std::vector<Vec3> stochastic_integral_eta(const FlowEnsemble& ens, const std::vector<JacobianPath>& jac, double tau);

/// CSV dump with columns path_id,step,theta,x,y,z.
void write_paths_csv(const std::filesystem::path& path, const FlowEnsemble& ens);

}  // namespace nsmc
