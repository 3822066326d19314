#pragma once

#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "nsmc/grid.hpp"
#include "nsmc/linalg.hpp"

namespace nsmc {

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

/// Periodic cube [0, side)^3 discretised by grid_n nodes per axis. The
/// default side 2*pi makes the Beltrami and Taylor-Green families periodic.
struct PeriodicCube {
  double side = 2.0 * std::numbers::pi;
  int grid_n = 16;

  PeriodicGrid grid() const { return PeriodicGrid(grid_n, side); }
};

/// R^3 with data supported in the ball of radius support_radius about
/// the origin.
struct WholeSpace {
  double support_radius = 1.0;
};

using Domain = std::variant<PeriodicCube, WholeSpace>;

/// Raises ConfigError when a domain violates its invariants.
void validate(const Domain& domain);

inline bool is_periodic(const Domain& d) { return std::holds_alternative<PeriodicCube>(d); }

// ---------------------------------------------------------------------------
// Analytic vector families
// ---------------------------------------------------------------------------

/// ABC (Beltrami) flow e^{-nu t} (A sin z + C cos y, B sin x + A cos z,
/// C sin y + B cos x). Exact Navier-Stokes solution with pressure -|u|^2/2.
struct Beltrami {
  double a = 1.0, b = 1.0, c = 1.0, nu = 0.0;
};

/// Two-dimensional Taylor-Green vortex embedded in R^3:
/// e^{-2 nu t} (sin x cos y, -cos x sin y, 0).
struct TaylorGreen {
  double nu = 0.0;
};

struct ConstantVector {
  Vec3 value = Vec3::Zero();
};

struct ZeroVector {};

/// omega x x.
struct RigidRotation {
  Vec3 omega = Vec3::UnitZ();
};

/// A x + b.
struct LinearVector {
  Mat3 matrix = Mat3::Zero();
  Vec3 offset = Vec3::Zero();
};

/// amplitude * exp(-|x - center|^2 / (2 width^2)).
struct GaussianBumpVector {
  Vec3 center = Vec3::Zero();
  double width = 1.0;
  Vec3 amplitude = Vec3::UnitX();
};

/// User-supplied field; both callables must be thread-safe.
struct CustomVector {
  std::function<Vec3(double, const Vec3&)> value;
  std::function<Mat3(double, const Vec3&)> gradient;
};

using VectorFamily = std::variant<Beltrami, TaylorGreen, ConstantVector, ZeroVector, RigidRotation, LinearVector,
                                  GaussianBumpVector, CustomVector>;

// ---------------------------------------------------------------------------
// Analytic scalar families
// ---------------------------------------------------------------------------

struct ZeroScalar {};

struct ConstantScalar {
  double value = 0.0;
};

/// amplitude * cos(k . x + phase).
struct CosineMode {
  Vec3 wavevector = Vec3::UnitX();
  double amplitude = 1.0;
  double phase = 0.0;
};

/// amplitude * exp(-|x - center|^2 / (2 width^2)).
struct GaussianBump {
  Vec3 center = Vec3::Zero();
  double width = 1.0;
  double amplitude = 1.0;
};

/// density on the closed ball |x - center| <= radius, zero outside.
struct UniformBall {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  double density = 1.0;
};

struct CustomScalar {
  std::function<double(double, const Vec3&)> value;
  std::function<Vec3(double, const Vec3&)> gradient;
};

using ScalarFamily = std::variant<ZeroScalar, ConstantScalar, CosineMode, GaussianBump, UniformBall, CustomScalar>;

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

/// Velocity-like field: either a named analytic family (exact evaluation
/// at any (t, x)) or time-indexed grid samples (trilinear in space with
/// periodic wrap, linear in time). Cheap to copy; immutable.
class VectorField {
 public:
  VectorField() : repr_(VectorFamily{ZeroVector{}}) {}
  VectorField(VectorFamily family) : repr_(std::move(family)) {}  // NOLINT(google-explicit-constructor)
  explicit VectorField(GridSeries<3> samples);

  bool is_sampled() const { return std::holds_alternative<SeriesPtr>(repr_); }
  const GridSeries<3>& series() const;
  const VectorFamily* family() const { return std::get_if<VectorFamily>(&repr_); }

  Vec3 eval(double t, const Vec3& x) const;

  /// Entry (i, k) = d u_i / d x_k. Exact for analytic families; centred
  /// differences with the grid spacing for sampled fields (O(h^2)).
  Mat3 gradient(double t, const Vec3& x) const;

 private:
  using SeriesPtr = std::shared_ptr<const GridSeries<3>>;
  std::variant<VectorFamily, SeriesPtr> repr_;
};

/// Scalar counterpart of VectorField (pressure, gamma, initial data ...).
class ScalarField {
 public:
  ScalarField() : repr_(ScalarFamily{ZeroScalar{}}) {}
  ScalarField(ScalarFamily family) : repr_(std::move(family)) {}  // NOLINT(google-explicit-constructor)
  explicit ScalarField(GridSeries<1> samples);

  bool is_sampled() const { return std::holds_alternative<SeriesPtr>(repr_); }
  const GridSeries<1>& series() const;
  const ScalarFamily* family() const { return std::get_if<ScalarFamily>(&repr_); }

  double eval(double t, const Vec3& x) const;
  Vec3 gradient(double t, const Vec3& x) const;

  /// Evaluates f(t, x_i + shift) for a fixed set of base points x_i and a
  /// stream of shifts. Monte Carlo kernels use this to share one Brownian
  /// path between many evaluation points; cosine modes are evaluated with
  /// the angle-addition identity instead of one cos() per point.
  class Translates {
   public:
    Translates(const ScalarField& field, double t, std::span<const Vec3> base);
    void eval(const Vec3& shift, std::span<double> out) const;
    /// f(t, x_i + shift) and f(t, x_i - shift) in one pass.
    void eval_pair(const Vec3& shift, std::span<double> plus, std::span<double> minus) const;
    std::size_t size() const { return base_.size(); }

   private:
    const ScalarField* field_;
    double t_;
    std::vector<Vec3> base_;
    const CosineMode* cosine_ = nullptr;
    std::vector<double> cos_base_, sin_base_;
  };

 private:
  using SeriesPtr = std::shared_ptr<const GridSeries<1>>;
  std::variant<ScalarFamily, SeriesPtr> repr_;
};

/// Time-indexed grid field of 3x3 matrices (stored gradients).
using MatrixSeries = GridSeries<9>;

inline Mat3 to_mat3(std::span<const double, 9> v) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) m(i, k) = v[static_cast<std::size_t>(3 * i + k)];
  return m;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline Vec3 eval(const VectorField& f, double t, const Vec3& x) { return f.eval(t, x); }
inline double eval(const ScalarField& f, double t, const Vec3& x) { return f.eval(t, x); }
inline Mat3 gradient(const VectorField& f, double t, const Vec3& x) { return f.gradient(t, x); }

/// Tr(a b) = sum_{j,k} a_{jk} b_{kj}. gamma(G, G) is Tr[(grad u)^2].
inline double gamma(const Mat3& a, const Mat3& b) { return (a * b).trace(); }

/// Samples a field at the nodes of `grid` for every time in `times`.
VectorField sample_on_grid(const VectorField& f, const PeriodicGrid& grid, const std::vector<double>& times);
ScalarField sample_on_grid(const ScalarField& f, const PeriodicGrid& grid, const std::vector<double>& times);

/// Pointwise divergence at time t on the grid nodes: spectral for sampled
/// input, exact trace of the analytic gradient otherwise.
ScalarField divergence(const VectorField& f, double t);
ScalarField divergence(const VectorField& f, double t, const PeriodicGrid& grid);

/// Leray projection f - grad Lap^{-1} div f by FFT on the periodic cube.
/// The zero wavenumber passes through unchanged. Analytic input is first
/// sampled on the domain grid; WholeSpace raises UnsupportedDomainError.
VectorField leray_project(const VectorField& f, double t);
VectorField leray_project(const VectorField& f, double t, const Domain& domain);

/// Sup, gradient-sup, discrete L^q, Lipschitz and Holder estimates of a
/// field at time t over the grid nodes. Grid L^q norms are Riemann sums
/// over the whole cube. Vector magnitudes are Euclidean, matrix
/// magnitudes Frobenius. The Holder seminorm uses nearest-neighbour
/// differences only and is a diagnostic.
struct FieldNorms {
  double sup_norm = 0.0;
  double grad_sup_norm = 0.0;
  std::vector<std::pair<double, double>> lq_norms;  // (q, ||f||_q)
  double lipschitz_est = 0.0;
  double holder_alpha = 0.5;
  double holder_seminorm = 0.0;

  double lq_norm(double q) const;
};

FieldNorms norms(const VectorField& f, double t, std::span<const double> q_list, double holder_alpha = 0.5);
FieldNorms norms(const VectorField& f, double t, std::span<const double> q_list, const PeriodicGrid& grid,
                 double holder_alpha = 0.5);

/// Discrete L^q norm (Riemann sum over the cube) of nodal magnitudes.
double grid_lq_norm(std::span<const double> magnitudes, const PeriodicGrid& grid, double q);

}  // namespace nsmc
