#pragma once

// Portable, bit-reproducible random helpers. The standard distributions are
// implementation-defined, so everything that feeds a trace or a sampling
// decision goes through these instead.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace freqtier {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, bound) (Lemire's multiply-shift with rejection).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  unsigned __int128 m = static_cast<unsigned __int128>(rng()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Fisher-Yates shuffle with a fixed algorithm (std::shuffle is not portable).
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Number of failed Bernoulli(p) trials before the next success.
/// Skipping ahead by this gap is equivalent in distribution to flipping a
/// coin on every access.
inline std::uint64_t geometric_gap(Rng& rng, double p) {
  if (p >= 1.0) return 0;
  double u = uniform01(rng);
  if (u <= 0.0) u = 0x1.0p-53;
  const double gap = std::floor(std::log(u) / std::log1p(-p));
  if (gap >= 9.0e18) return UINT64_C(9000000000000000000);
  return static_cast<std::uint64_t>(gap);
}

}  // namespace freqtier
