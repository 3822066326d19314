#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

#include <boost/random/normal_distribution.hpp>

#include "nsmc/linalg.hpp"

namespace nsmc {

/// Finalizer of the splitmix64 generator; a strong 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the key of an independent random stream from a run seed and
/// a tuple of integer identifiers (path index, grid node, time node ...).
/// The mapping is a pure function so streams do not depend on scheduling.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t id : ids) {
    h = mix64(h ^ (id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }
  return h;
}

/// Counter-based splitmix64 stream: output n is mix64(key + (n+1) * golden).
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) noexcept : state_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

/// Standard normal variates drawn from one counter-based stream.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t key) noexcept : rng_(key) {}

  double operator()() { return dist_(rng_); }

  Vec3 vec3() {
    // Evaluation order of the three draws is fixed explicitly.
    const double a = dist_(rng_);
    const double b = dist_(rng_);
    const double c = dist_(rng_);
    return {a, b, c};
  }

 private:
  CounterRng rng_;
  boost::random::normal_distribution<double> dist_{0.0, 1.0};
};

}  // namespace nsmc
