#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace mtfb {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Order-sensitive hash of a key tuple into a seed.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (const std::uint64_t k : keys) {
    h = mix64(h ^ mix64(k));
  }
  return h;
}

/// Independent generator for one (key tuple); streams for distinct tuples
/// do not depend on the order in which they are created.
inline Rng substream(std::initializer_list<std::uint64_t> keys) { return Rng(derive_seed(keys)); }

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n).
inline int uniform_index(Rng& rng, int n) {
  return std::uniform_int_distribution<int>(0, n - 1)(rng);
}

/// Circularly symmetric complex Gaussian with E|z|^2 = 1 (Box-Muller).
inline std::complex<double> complex_gaussian(Rng& rng) {
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  const double phase = 2.0 * 3.14159265358979323846 * uniform01(rng);
  return std::polar(std::sqrt(-std::log(u)), phase);
}

} // namespace mtfb
