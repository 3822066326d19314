#include "nsmc/fields.hpp"

#include <algorithm>
#include <cmath>

#include "nsmc/errors.hpp"
#include "nsmc/spectral.hpp"

namespace nsmc {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate(const Domain& domain) {
  std::visit(Overloaded{
                 [](const PeriodicCube& c) { (void)c.grid(); },
                 [](const WholeSpace& w) {
                   if (!(w.support_radius > 0.0)) throw ConfigError("support_radius must be > 0");
                 },
             },
             domain);
}

// ---------------------------------------------------------------------------
// Analytic families
// ---------------------------------------------------------------------------

namespace {

Vec3 family_value(const VectorFamily& fam, double t, const Vec3& x) {
  return std::visit(
      Overloaded{
          [&](const Beltrami& f) -> Vec3 {
            const double e = std::exp(-f.nu * t);
            return e * Vec3(f.a * std::sin(x.z()) + f.c * std::cos(x.y()), f.b * std::sin(x.x()) + f.a * std::cos(x.z()),
                            f.c * std::sin(x.y()) + f.b * std::cos(x.x()));
          },
          [&](const TaylorGreen& f) -> Vec3 {
            const double e = std::exp(-2.0 * f.nu * t);
            return e * Vec3(std::sin(x.x()) * std::cos(x.y()), -std::cos(x.x()) * std::sin(x.y()), 0.0);
          },
          [&](const ConstantVector& f) -> Vec3 { return f.value; },
          [&](const ZeroVector&) -> Vec3 { return Vec3::Zero(); },
          [&](const RigidRotation& f) -> Vec3 { return f.omega.cross(x); },
          [&](const LinearVector& f) -> Vec3 { return f.matrix * x + f.offset; },
          [&](const GaussianBumpVector& f) -> Vec3 {
            return f.amplitude * std::exp(-(x - f.center).squaredNorm() / (2.0 * f.width * f.width));
          },
          [&](const CustomVector& f) -> Vec3 { return f.value(t, x); },
      },
      fam);
}

Mat3 family_gradient(const VectorFamily& fam, double t, const Vec3& x) {
  return std::visit(
      Overloaded{
          [&](const Beltrami& f) -> Mat3 {
            const double e = std::exp(-f.nu * t);
            Mat3 g;
            g << 0.0, -f.c * std::sin(x.y()), f.a * std::cos(x.z()),  //
                f.b * std::cos(x.x()), 0.0, -f.a * std::sin(x.z()),    //
                -f.b * std::sin(x.x()), f.c * std::cos(x.y()), 0.0;
            return e * g;
          },
          [&](const TaylorGreen& f) -> Mat3 {
            const double e = std::exp(-2.0 * f.nu * t);
            const double cx = std::cos(x.x()), sx = std::sin(x.x()), cy = std::cos(x.y()), sy = std::sin(x.y());
            Mat3 g;
            g << cx * cy, -sx * sy, 0.0,  //
                sx * sy, -cx * cy, 0.0,   //
                0.0, 0.0, 0.0;
            return e * g;
          },
          [&](const ConstantVector&) -> Mat3 { return Mat3::Zero(); },
          [&](const ZeroVector&) -> Mat3 { return Mat3::Zero(); },
          [&](const RigidRotation& f) -> Mat3 {
            const Vec3& w = f.omega;
            Mat3 g;
            g << 0.0, -w.z(), w.y(),  //
                w.z(), 0.0, -w.x(),   //
                -w.y(), w.x(), 0.0;
            return g;
          },
          [&](const LinearVector& f) -> Mat3 { return f.matrix; },
          [&](const GaussianBumpVector& f) -> Mat3 {
            const Vec3 d = x - f.center;
            const double w2 = f.width * f.width;
            const double e = std::exp(-d.squaredNorm() / (2.0 * w2));
            return f.amplitude * (-d / w2).transpose() * e;
          },
          [&](const CustomVector& f) -> Mat3 {
            if (!f.gradient) throw UnsupportedModeError("custom vector field has no gradient");
            return f.gradient(t, x);
          },
      },
      fam);
}

double family_value(const ScalarFamily& fam, double t, const Vec3& x) {
  return std::visit(Overloaded{
                        [&](const ZeroScalar&) { return 0.0; },
                        [&](const ConstantScalar& f) { return f.value; },
                        [&](const CosineMode& f) { return f.amplitude * std::cos(f.wavevector.dot(x) + f.phase); },
                        [&](const GaussianBump& f) {
                          return f.amplitude * std::exp(-(x - f.center).squaredNorm() / (2.0 * f.width * f.width));
                        },
                        [&](const UniformBall& f) {
                          return (x - f.center).squaredNorm() <= f.radius * f.radius ? f.density : 0.0;
                        },
                        [&](const CustomScalar& f) { return f.value(t, x); },
                    },
                    fam);
}

Vec3 family_gradient(const ScalarFamily& fam, double t, const Vec3& x) {
  return std::visit(Overloaded{
                        [&](const ZeroScalar&) -> Vec3 { return Vec3::Zero(); },
                        [&](const ConstantScalar&) -> Vec3 { return Vec3::Zero(); },
                        [&](const CosineMode& f) -> Vec3 {
                          return -f.amplitude * std::sin(f.wavevector.dot(x) + f.phase) * f.wavevector;
                        },
                        [&](const GaussianBump& f) -> Vec3 {
                          const Vec3 d = x - f.center;
                          const double w2 = f.width * f.width;
                          return -f.amplitude * std::exp(-d.squaredNorm() / (2.0 * w2)) / w2 * d;
                        },
                        // Distributional gradient is a surface measure; zero almost everywhere.
                        [&](const UniformBall&) -> Vec3 { return Vec3::Zero(); },
                        [&](const CustomScalar& f) -> Vec3 {
                          if (!f.gradient) throw UnsupportedModeError("custom scalar field has no gradient");
                          return f.gradient(t, x);
                        },
                    },
                    fam);
}

}  // namespace

// ---------------------------------------------------------------------------
// VectorField / ScalarField
// ---------------------------------------------------------------------------

VectorField::VectorField(GridSeries<3> samples) : repr_(std::make_shared<const GridSeries<3>>(std::move(samples))) {}

const GridSeries<3>& VectorField::series() const {
  if (!is_sampled()) throw UnsupportedModeError("field is analytic, not grid-sampled");
  return *std::get<SeriesPtr>(repr_);
}

Vec3 VectorField::eval(double t, const Vec3& x) const {
  if (const auto* fam = family()) return family_value(*fam, t, x);
  Vec3 out;
  series().sample(t, x, out.data());
  return out;
}

Mat3 VectorField::gradient(double t, const Vec3& x) const {
  if (const auto* fam = family()) return family_gradient(*fam, t, x);
  const auto& s = series();
  const double h = s.grid().h();
  Mat3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    Vec3 up, um;
    s.sample(t, xp, up.data());
    s.sample(t, xm, um.data());
    g.col(k) = (up - um) / (2.0 * h);
  }
  return g;
}

ScalarField::ScalarField(GridSeries<1> samples) : repr_(std::make_shared<const GridSeries<1>>(std::move(samples))) {}

const GridSeries<1>& ScalarField::series() const {
  if (!is_sampled()) throw UnsupportedModeError("field is analytic, not grid-sampled");
  return *std::get<SeriesPtr>(repr_);
}

double ScalarField::eval(double t, const Vec3& x) const {
  if (const auto* fam = family()) return family_value(*fam, t, x);
  double out;
  series().sample(t, x, &out);
  return out;
}

Vec3 ScalarField::gradient(double t, const Vec3& x) const {
  if (const auto* fam = family()) return family_gradient(*fam, t, x);
  const auto& s = series();
  const double h = s.grid().h();
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    double fp, fm;
    s.sample(t, xp, &fp);
    s.sample(t, xm, &fm);
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

ScalarField::Translates::Translates(const ScalarField& field, double t, std::span<const Vec3> base)
    : field_(&field), t_(t), base_(base.begin(), base.end()) {
  if (const auto* fam = field.family()) cosine_ = std::get_if<CosineMode>(fam);
  if (cosine_) {
    cos_base_.resize(base_.size());
    sin_base_.resize(base_.size());
    for (std::size_t i = 0; i < base_.size(); ++i) {
      const double a = cosine_->wavevector.dot(base_[i]) + cosine_->phase;
      cos_base_[i] = std::cos(a);
      sin_base_[i] = std::sin(a);
    }
  }
}

void ScalarField::Translates::eval(const Vec3& shift, std::span<double> out) const {
  if (cosine_) {
    // cos(a + b) = cos a cos b - sin a sin b
    const double b = cosine_->wavevector.dot(shift);
    const double cb = std::cos(b);
    const double sb = std::sin(b);
    const double amp = cosine_->amplitude;
    for (std::size_t i = 0; i < base_.size(); ++i) out[i] = amp * (cos_base_[i] * cb - sin_base_[i] * sb);
    return;
  }
  for (std::size_t i = 0; i < base_.size(); ++i) out[i] = field_->eval(t_, base_[i] + shift);
}

void ScalarField::Translates::eval_pair(const Vec3& shift, std::span<double> plus, std::span<double> minus) const {
  if (cosine_) {
    const double b = cosine_->wavevector.dot(shift);
    const double cb = cosine_->amplitude * std::cos(b);
    const double sb = cosine_->amplitude * std::sin(b);
    for (std::size_t i = 0; i < base_.size(); ++i) {
      const double c = cos_base_[i] * cb;
      const double s = sin_base_[i] * sb;
      plus[i] = c - s;
      minus[i] = c + s;
    }
    return;
  }
  for (std::size_t i = 0; i < base_.size(); ++i) {
    plus[i] = field_->eval(t_, base_[i] + shift);
    minus[i] = field_->eval(t_, base_[i] - shift);
  }
}

// ---------------------------------------------------------------------------
// Grid operations
// ---------------------------------------------------------------------------

VectorField sample_on_grid(const VectorField& f, const PeriodicGrid& grid, const std::vector<double>& times) {
  GridSeries<3> s(grid, times);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    for (std::size_t node = 0; node < grid.size(); ++node) {
      const Vec3 v = f.eval(times[ti], grid.point(node));
      auto out = s.at(ti, node);
      for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(c)] = v[c];
    }
  }
  s.check_finite();
  return VectorField(std::move(s));
}

ScalarField sample_on_grid(const ScalarField& f, const PeriodicGrid& grid, const std::vector<double>& times) {
  GridSeries<1> s(grid, times);
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    for (std::size_t node = 0; node < grid.size(); ++node) s.at(ti, node)[0] = f.eval(times[ti], grid.point(node));
  }
  s.check_finite();
  return ScalarField(std::move(s));
}

namespace {

std::array<std::vector<double>, 3> components_at(const VectorField& f, double t, const PeriodicGrid& grid) {
  std::array<std::vector<double>, 3> comp;
  for (auto& c : comp) c.resize(grid.size());
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const Vec3 v = f.eval(t, grid.point(node));
    for (int c = 0; c < 3; ++c) comp[static_cast<std::size_t>(c)][node] = v[c];
  }
  return comp;
}

}  // namespace

ScalarField divergence(const VectorField& f, double t, const PeriodicGrid& grid) {
  std::vector<double> div(grid.size());
  if (f.is_sampled()) {
    const SpectralOps ops(grid);
    div = ops.divergence(components_at(f, t, grid));
  } else {
    for (std::size_t node = 0; node < grid.size(); ++node) div[node] = f.gradient(t, grid.point(node)).trace();
  }
  return ScalarField(GridSeries<1>(grid, {t}, std::move(div)));
}

ScalarField divergence(const VectorField& f, double t) {
  if (f.is_sampled()) return divergence(f, t, f.series().grid());
  VectorField copy = f;
  return ScalarField(CustomScalar{[copy](double s, const Vec3& x) { return copy.gradient(s, x).trace(); }, {}});
}

VectorField leray_project(const VectorField& f, double t, const Domain& domain) {
  if (!is_periodic(domain)) throw UnsupportedDomainError("Leray projection requires the periodic cube");
  const PeriodicGrid grid = f.is_sampled() ? f.series().grid() : std::get<PeriodicCube>(domain).grid();
  const SpectralOps ops(grid);
  const auto proj = ops.leray(components_at(f, t, grid));
  std::vector<double> values(grid.size() * 3);
  for (std::size_t node = 0; node < grid.size(); ++node) {
    for (int c = 0; c < 3; ++c) values[node * 3 + static_cast<std::size_t>(c)] = proj[static_cast<std::size_t>(c)][node];
  }
  return VectorField(GridSeries<3>(grid, {t}, std::move(values)));
}

VectorField leray_project(const VectorField& f, double t) {
  if (f.is_sampled()) {
    const auto& g = f.series().grid();
    return leray_project(f, t, PeriodicCube{g.side, g.n});
  }
  return leray_project(f, t, PeriodicCube{});
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

double FieldNorms::lq_norm(double q) const {
  for (const auto& [qq, v] : lq_norms) {
    if (qq == q) return v;
  }
  throw ConfigError("L^q norm for q = " + std::to_string(q) + " was not requested");
}

double grid_lq_norm(std::span<const double> magnitudes, const PeriodicGrid& grid, double q) {
  if (!(q >= 1.0)) throw ConfigError("L^q exponent must be >= 1");
  double sum = 0.0;
  for (double m : magnitudes) sum += std::pow(std::abs(m), q);
  return std::pow(sum * grid.cell_volume(), 1.0 / q);
}

FieldNorms norms(const VectorField& f, double t, std::span<const double> q_list, const PeriodicGrid& grid,
                 double holder_alpha) {
  FieldNorms out;
  out.holder_alpha = holder_alpha;
  const std::size_t n = grid.size();
  std::vector<Vec3> vals(n);
  std::vector<double> mag(n);
  for (std::size_t node = 0; node < n; ++node) {
    vals[node] = f.eval(t, grid.point(node));
    mag[node] = vals[node].norm();
    out.sup_norm = std::max(out.sup_norm, mag[node]);
    out.grad_sup_norm = std::max(out.grad_sup_norm, f.gradient(t, grid.point(node)).norm());
  }
  for (double q : q_list) out.lq_norms.emplace_back(q, grid_lq_norm(mag, grid, q));
  const double h = grid.h();
  for (std::size_t node = 0; node < n; ++node) {
    const auto c = grid.coords(node);
    for (int a = 0; a < 3; ++a) {
      auto d = c;
      d[static_cast<std::size_t>(a)] += 1;
      const double diff = (vals[grid.index(d[0], d[1], d[2])] - vals[node]).norm();
      out.lipschitz_est = std::max(out.lipschitz_est, diff / h);
      out.holder_seminorm = std::max(out.holder_seminorm, diff / std::pow(h, holder_alpha));
    }
  }
  return out;
}

FieldNorms norms(const VectorField& f, double t, std::span<const double> q_list, double holder_alpha) {
  const PeriodicGrid grid = f.is_sampled() ? f.series().grid() : PeriodicCube{}.grid();
  return norms(f, t, q_list, grid, holder_alpha);
}

}  // namespace nsmc
