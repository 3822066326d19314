#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nsmc/errors.hpp"
#include "nsmc/linalg.hpp"

namespace nsmc {

/// Uniform node-centred grid on the periodic cube [0, side)^3.
/// Node (ix, iy, iz) sits at (ix, iy, iz) * h; flat index is row-major
/// with z fastest.
struct PeriodicGrid {
  int n = 16;
  double side = 2.0 * std::numbers::pi;

  PeriodicGrid() = default;
  PeriodicGrid(int n_, double side_) : n(n_), side(side_) {
    if (n < 4) throw ConfigError("grid_n must be >= 4, got " + std::to_string(n));
    if (!(side > 0.0)) throw ConfigError("periodic side must be > 0");
  }

  double h() const { return side / n; }
  double cell_volume() const { return h() * h() * h(); }
  double volume() const { return side * side * side; }
  std::size_t size() const { return static_cast<std::size_t>(n) * n * n; }

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(wrap(ix)) * n + wrap(iy)) * n + wrap(iz);
  }
  std::array<int, 3> coords(std::size_t idx) const {
    const int iz = static_cast<int>(idx % n);
    const int iy = static_cast<int>((idx / n) % n);
    const int ix = static_cast<int>(idx / (static_cast<std::size_t>(n) * n));
    return {ix, iy, iz};
  }
  Vec3 point(std::size_t idx) const {
    const auto c = coords(idx);
    return {c[0] * h(), c[1] * h(), c[2] * h()};
  }
  int wrap(int i) const {
    const int r = i % n;
    return r < 0 ? r + n : r;
  }

  bool operator==(const PeriodicGrid&) const = default;
};

namespace detail {

/// Splits a fractional grid coordinate into (cell, weight). Coordinates
/// within 1e-10 of a node snap to it so nodes are reproduced bit-exactly.
inline void split_coordinate(double u, int n, int& i0, double& f) {
  const double r = std::round(u);
  if (std::abs(u - r) < 1e-10) {
    i0 = static_cast<int>(r);
    f = 0.0;
  } else {
    const double fl = std::floor(u);
    i0 = static_cast<int>(fl);
    f = u - fl;
  }
  i0 %= n;
  if (i0 < 0) i0 += n;
}

}  // namespace detail

/// Time-indexed samples of a C-component field on a periodic grid.
/// Layout: [time][node][component]. Interpolation is trilinear in space
/// (periodic wrap) and linear in time. Immutable after construction.
template <int C>
class GridSeries {
 public:
  static constexpr int components = C;

  GridSeries() = default;

  GridSeries(PeriodicGrid grid, std::vector<double> times)
      : grid_(grid), times_(std::move(times)), values_(times_.size() * grid_.size() * C, 0.0) {
    validate_times();
  }

  GridSeries(PeriodicGrid grid, std::vector<double> times, std::vector<double> values)
      : grid_(grid), times_(std::move(times)), values_(std::move(values)) {
    validate_times();
    if (values_.size() != times_.size() * grid_.size() * C) {
      throw DataError("grid series: expected " + std::to_string(times_.size() * grid_.size() * C) +
                      " samples, got " + std::to_string(values_.size()));
    }
    check_finite();
  }

  const PeriodicGrid& grid() const { return grid_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t time_count() const { return times_.size(); }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  std::span<const double, C> at(std::size_t time_index, std::size_t node) const {
    return std::span<const double, C>(values_.data() + (time_index * grid_.size() + node) * C, C);
  }
  std::span<double, C> at(std::size_t time_index, std::size_t node) {
    return std::span<double, C>(values_.data() + (time_index * grid_.size() + node) * C, C);
  }

  /// Raises DataError if any stored sample is NaN or infinite.
  void check_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) throw DataError("grid series contains non-finite samples");
    }
  }

  /// Locates t on the time grid: returns the lower node and the weight of
  /// the upper node. Raises OutOfRangeError outside [first, last].
  void locate_time(double t, std::size_t& i0, double& w) const {
    const double t0 = times_.front();
    const double t1 = times_.back();
    const double tol = 1e-12 * std::max(1.0, std::abs(t1));
    if (t < t0 - tol || t > t1 + tol) {
      throw OutOfRangeError("time " + std::to_string(t) + " outside field time grid [" + std::to_string(t0) + ", " +
                            std::to_string(t1) + "]");
    }
    if (times_.size() == 1) {
      i0 = 0;
      w = 0.0;
      return;
    }
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    hi = std::clamp<std::size_t>(hi, 1, times_.size() - 1);
    i0 = hi - 1;
    const double ta = times_[i0];
    const double tb = times_[hi];
    if (std::abs(t - ta) <= tol) {
      w = 0.0;
    } else if (std::abs(t - tb) <= tol) {
      w = 1.0;
    } else {
      w = (t - ta) / (tb - ta);
    }
  }

  /// Trilinear interpolation of time slice `ti` at x.
  void sample_slice(std::size_t ti, const Vec3& x, double* out) const {
    const int n = grid_.n;
    const double inv_h = 1.0 / grid_.h();
    int i[3];
    double f[3];
    for (int a = 0; a < 3; ++a) detail::split_coordinate(x[a] * inv_h, n, i[a], f[a]);
    const int j0 = (i[0] + 1) % n, j1 = (i[1] + 1) % n, j2 = (i[2] + 1) % n;
    const double* base = values_.data() + ti * grid_.size() * C;
    const auto idx = [n](int a, int b, int c) { return (static_cast<std::size_t>(a) * n + b) * n + c; };
    const double* v000 = base + idx(i[0], i[1], i[2]) * C;
    const double* v001 = base + idx(i[0], i[1], j2) * C;
    const double* v010 = base + idx(i[0], j1, i[2]) * C;
    const double* v011 = base + idx(i[0], j1, j2) * C;
    const double* v100 = base + idx(j0, i[1], i[2]) * C;
    const double* v101 = base + idx(j0, i[1], j2) * C;
    const double* v110 = base + idx(j0, j1, i[2]) * C;
    const double* v111 = base + idx(j0, j1, j2) * C;
    const double gx = 1.0 - f[0], gy = 1.0 - f[1], gz = 1.0 - f[2];
    const double w000 = gx * gy * gz, w001 = gx * gy * f[2], w010 = gx * f[1] * gz, w011 = gx * f[1] * f[2];
    const double w100 = f[0] * gy * gz, w101 = f[0] * gy * f[2], w110 = f[0] * f[1] * gz, w111 = f[0] * f[1] * f[2];
    if (f[0] == 0.0 && f[1] == 0.0 && f[2] == 0.0) {
      for (int c = 0; c < C; ++c) out[c] = v000[c];
      return;
    }
    for (int c = 0; c < C; ++c) {
      out[c] = w000 * v000[c] + w001 * v001[c] + w010 * v010[c] + w011 * v011[c] + w100 * v100[c] +
               w101 * v101[c] + w110 * v110[c] + w111 * v111[c];
    }
  }

  /// Space-time interpolation at (t, x).
  void sample(double t, const Vec3& x, double* out) const {
    std::size_t ti;
    double w;
    locate_time(t, ti, w);
    sample_slice(ti, x, out);
    if (w == 0.0) return;
    double upper[C];
    sample_slice(ti + 1, x, upper);
    if (w == 1.0) {
      for (int c = 0; c < C; ++c) out[c] = upper[c];
      return;
    }
    for (int c = 0; c < C; ++c) out[c] = (1.0 - w) * out[c] + w * upper[c];
  }

  std::array<double, C> sample(double t, const Vec3& x) const {
    std::array<double, C> out;
    sample(t, x, out.data());
    return out;
  }

 private:
  void validate_times() const {
    if (times_.empty()) throw DataError("grid series needs at least one time node");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) throw DataError("grid series time grid must be strictly increasing");
    }
  }

  PeriodicGrid grid_;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Uniform time grid of `count` nodes on [0, t_final].
inline std::vector<double> uniform_times(double t_final, int count) {
  if (count < 1) throw ConfigError("time grid needs at least one node");
  std::vector<double> t(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = count == 1 ? t_final : t_final * i / (count - 1);
  return t;
}

}  // namespace nsmc
