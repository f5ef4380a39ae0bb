#pragma once

#include <cstdint>

namespace freqtier {

/// SplitMix64 finalizer. Used for every hash in the project so that counter
/// placement and trace digests are reproducible across platforms.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Streaming 64-bit digest over a sequence of little-endian 64-bit words.
class Digest64 {
 public:
  constexpr void update(std::uint64_t word) noexcept {
    state_ = mix64(state_ ^ word) + 0x632be59bd9b4e019ULL;
  }
  constexpr std::uint64_t value() const noexcept { return mix64(state_); }

 private:
  std::uint64_t state_ = 0x6a09e667f3bcc908ULL;
};

}  // namespace freqtier
