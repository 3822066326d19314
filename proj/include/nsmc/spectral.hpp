#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include "nsmc/grid.hpp"

namespace nsmc {

/// Pseudo-spectral operators on one periodic grid. Real arrays have
/// grid.size() entries in the GridSeries node order; spectra use the
/// real-to-complex half layout n x n x (n/2 + 1).
///
/// Odd-order derivatives zero the Nyquist wavenumber so that gradient,
/// divergence and Leray projection are mutually consistent (the projected
/// field is exactly divergence-free in the discrete sense and gradients
/// are annihilated exactly).
class SpectralOps {
 public:
  explicit SpectralOps(const PeriodicGrid& grid);

  using Spectrum = std::vector<std::complex<double>>;
  using Real = std::vector<double>;

  const PeriodicGrid& grid() const { return grid_; }
  std::size_t spectrum_size() const { return static_cast<std::size_t>(grid_.n) * grid_.n * (grid_.n / 2 + 1); }

  Spectrum forward(std::span<const double> f) const;
  Real inverse(const Spectrum& s) const;

  /// Wavenumber along `axis` for spectral index (i, j, l); `odd` selects
  /// the Nyquist-zeroed variant used for first derivatives.
  double wavenumber(int axis, int i, int j, int l, bool odd) const;

  Real derivative(std::span<const double> f, int axis) const;
  std::array<Real, 3> gradient(std::span<const double> f) const;
  Real divergence(const std::array<Real, 3>& v) const;
  Real laplacian(std::span<const double> f) const;
  std::array<Real, 3> leray(const std::array<Real, 3>& v) const;

  /// Mean of a nodal field.
  double mean(std::span<const double> f) const;

  /// Solution of -Lap p = gamma for zero-mean gamma; p has zero mean.
  /// The caller is responsible for the zero-mean check.
  struct PoissonSolution {
    Real p;
    std::array<Real, 3> grad;
    std::array<Real, 6> hessian;  // xx, xy, xz, yy, yz, zz
  };
  PoissonSolution poisson(std::span<const double> gamma, bool want_hessian) const;

  /// Evaluates the trigonometric interpolant of spectrum s at an
  /// arbitrary point (exact for band-limited data).
  double evaluate(const Spectrum& s, const Vec3& x) const;

  /// Parseval: integral over the cube of f^2 given its spectrum.
  double integral_of_square(const Spectrum& s) const;

 private:
  PeriodicGrid grid_;
};

}  // namespace nsmc
