#include "nsmc/spectral.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace nsmc {

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  return std::unique_ptr<T[], FftwFree>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

struct Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

// FFTW planning is not thread-safe; plans are created once per grid size
// under a lock and executed concurrently through the new-array interface.
const Plans& plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, Plans> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const std::size_t real_size = static_cast<std::size_t>(n) * n * n;
  const std::size_t cplx_size = static_cast<std::size_t>(n) * n * (n / 2 + 1);
  auto in = fftw_buffer<double>(real_size);
  auto out = fftw_buffer<fftw_complex>(cplx_size);
  Plans p;
  p.r2c = fftw_plan_dft_r2c_3d(n, n, n, in.get(), out.get(), FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r_3d(n, n, n, out.get(), in.get(), FFTW_ESTIMATE);
  return cache.emplace(n, p).first->second;
}

}  // namespace

SpectralOps::SpectralOps(const PeriodicGrid& grid) : grid_(grid) { plans_for(grid_.n); }

SpectralOps::Spectrum SpectralOps::forward(std::span<const double> f) const {
  const auto& p = plans_for(grid_.n);
  auto in = fftw_buffer<double>(grid_.size());
  auto out = fftw_buffer<fftw_complex>(spectrum_size());
  std::copy(f.begin(), f.end(), in.get());
  fftw_execute_dft_r2c(p.r2c, in.get(), out.get());
  Spectrum s(spectrum_size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = {out[i][0], out[i][1]};
  return s;
}

SpectralOps::Real SpectralOps::inverse(const Spectrum& s) const {
  const auto& p = plans_for(grid_.n);
  auto in = fftw_buffer<fftw_complex>(spectrum_size());
  auto out = fftw_buffer<double>(grid_.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    in[i][0] = s[i].real();
    in[i][1] = s[i].imag();
  }
  fftw_execute_dft_c2r(p.c2r, in.get(), out.get());
  const double scale = 1.0 / static_cast<double>(grid_.size());
  Real f(grid_.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = out[i] * scale;
  return f;
}

double SpectralOps::wavenumber(int axis, int i, int j, int l, bool odd) const {
  const int n = grid_.n;
  const int idx = axis == 0 ? i : axis == 1 ? j : l;
  int m = idx;
  if (axis < 2 && idx > n / 2) m = idx - n;
  if (odd && n % 2 == 0 && (idx == n / 2)) return 0.0;
  return 2.0 * std::numbers::pi / grid_.side * m;
}

namespace {

template <class F>
void for_each_mode(int n, F&& f) {
  const int nz = n / 2 + 1;
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < nz; ++l, ++idx) f(idx, i, j, l);
}

}  // namespace

SpectralOps::Real SpectralOps::derivative(std::span<const double> f, int axis) const {
  auto s = forward(f);
  for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
    s[idx] *= std::complex<double>(0.0, wavenumber(axis, i, j, l, true));
  });
  return inverse(s);
}

std::array<SpectralOps::Real, 3> SpectralOps::gradient(std::span<const double> f) const {
  const auto s = forward(f);
  std::array<Real, 3> out;
  for (int a = 0; a < 3; ++a) {
    Spectrum d = s;
    for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
      d[idx] *= std::complex<double>(0.0, wavenumber(a, i, j, l, true));
    });
    out[static_cast<std::size_t>(a)] = inverse(d);
  }
  return out;
}

SpectralOps::Real SpectralOps::divergence(const std::array<Real, 3>& v) const {
  Spectrum acc(spectrum_size(), {0.0, 0.0});
  for (int a = 0; a < 3; ++a) {
    const auto s = forward(v[static_cast<std::size_t>(a)]);
    for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
      acc[idx] += s[idx] * std::complex<double>(0.0, wavenumber(a, i, j, l, true));
    });
  }
  return inverse(acc);
}

SpectralOps::Real SpectralOps::laplacian(std::span<const double> f) const {
  auto s = forward(f);
  for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
    double k2 = 0.0;
    for (int a = 0; a < 3; ++a) k2 += std::pow(wavenumber(a, i, j, l, false), 2);
    s[idx] *= -k2;
  });
  return inverse(s);
}

std::array<SpectralOps::Real, 3> SpectralOps::leray(const std::array<Real, 3>& v) const {
  std::array<Spectrum, 3> s;
  for (int a = 0; a < 3; ++a) s[static_cast<std::size_t>(a)] = forward(v[static_cast<std::size_t>(a)]);
  for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
    const double k[3] = {wavenumber(0, i, j, l, true), wavenumber(1, i, j, l, true), wavenumber(2, i, j, l, true)};
    const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if (k2 == 0.0) return;
    const std::complex<double> kdotf = k[0] * s[0][idx] + k[1] * s[1][idx] + k[2] * s[2][idx];
    for (int a = 0; a < 3; ++a) s[static_cast<std::size_t>(a)][idx] -= k[a] * kdotf / k2;
  });
  std::array<Real, 3> out;
  for (int a = 0; a < 3; ++a) out[static_cast<std::size_t>(a)] = inverse(s[static_cast<std::size_t>(a)]);
  return out;
}

double SpectralOps::mean(std::span<const double> f) const {
  double sum = 0.0;
  for (double v : f) sum += v;
  return sum / static_cast<double>(f.size());
}

SpectralOps::PoissonSolution SpectralOps::poisson(std::span<const double> gamma, bool want_hessian) const {
  auto s = forward(gamma);
  for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
    double k2 = 0.0;
    for (int a = 0; a < 3; ++a) k2 += std::pow(wavenumber(a, i, j, l, false), 2);
    s[idx] = k2 == 0.0 ? std::complex<double>(0.0, 0.0) : s[idx] / k2;
  });
  PoissonSolution out;
  out.p = inverse(s);
  for (int a = 0; a < 3; ++a) {
    Spectrum d = s;
    for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
      d[idx] *= std::complex<double>(0.0, wavenumber(a, i, j, l, true));
    });
    out.grad[static_cast<std::size_t>(a)] = inverse(d);
  }
  if (want_hessian) {
    static constexpr int pairs[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    for (int q = 0; q < 6; ++q) {
      const int a = pairs[q][0];
      const int b = pairs[q][1];
      Spectrum d = s;
      for_each_mode(grid_.n, [&](std::size_t idx, int i, int j, int l) {
        const double ka = wavenumber(a, i, j, l, a != b);
        const double kb = wavenumber(b, i, j, l, a != b);
        d[idx] *= -ka * kb;
      });
      out.hessian[static_cast<std::size_t>(q)] = inverse(d);
    }
  }
  return out;
}

double SpectralOps::evaluate(const Spectrum& s, const Vec3& x) const {
  // Hermitian half layout: interior z-planes count twice. Along a Nyquist
  // axis the exponential is replaced by its symmetric average, a cosine.
  const int n = grid_.n;
  const bool even = n % 2 == 0;
  double acc = 0.0;
  for_each_mode(n, [&](std::size_t idx, int i, int j, int l) {
    const double weight = (l == 0 || (even && l == n / 2)) ? 1.0 : 2.0;
    const int ids[3] = {i, j, l};
    double phase = 0.0;
    double nyq_factor = 1.0;
    for (int a = 0; a < 3; ++a) {
      const double k = wavenumber(a, i, j, l, false);
      if (even && ids[a] == n / 2) {
        nyq_factor *= std::cos(k * x[a]);
      } else {
        phase += k * x[a];
      }
    }
    acc += weight * nyq_factor * (s[idx].real() * std::cos(phase) - s[idx].imag() * std::sin(phase));
  });
  return acc / static_cast<double>(grid_.size());
}

double SpectralOps::integral_of_square(const Spectrum& s) const {
  const int n = grid_.n;
  double acc = 0.0;
  for_each_mode(n, [&](std::size_t idx, int, int, int l) {
    const double weight = (l == 0 || (n % 2 == 0 && l == n / 2)) ? 1.0 : 2.0;
    acc += weight * std::norm(s[idx]);
  });
  return acc * grid_.volume() / (static_cast<double>(grid_.size()) * static_cast<double>(grid_.size()));
}

}  // namespace nsmc
