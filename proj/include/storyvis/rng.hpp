#ifndef STORYVIS_RNG_HPP_
#define STORYVIS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace storyvis {

using Rng = std::mt19937_64;

// Uniform in [0, 1) from the top 53 bits; portable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::uint64_t uniform_int(Rng& rng, std::uint64_t n) { return rng() % n; }

// SplitMix64 step; used to fan one master seed out into independent streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace storyvis

#endif  // STORYVIS_RNG_HPP_
