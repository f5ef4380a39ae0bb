#pragma once

// Counting bloom filter with conservative update over packed saturating
// counters, in plain or cache-line-blocked layout.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "freqtier/hash.hpp"

namespace freqtier {

using PageId = std::uint64_t;

enum class Layout { Plain, Blocked };

inline std::string_view to_string(Layout layout) {
  return layout == Layout::Plain ? "plain" : "blocked";
}

inline Layout parse_layout(std::string_view name) {
  if (name == "plain") return Layout::Plain;
  if (name == "blocked") return Layout::Blocked;
  throw std::invalid_argument("unknown sketch layout '" + std::string(name) + "'");
}

struct SketchConfig {
  static constexpr unsigned kMaxHashes = 32;
  static constexpr unsigned kBlockBits = 512;  // one 64-byte cache line

  std::uint64_t num_counters = 1u << 16;
  unsigned counter_bits = 4;
  unsigned num_hashes = 3;
  Layout layout = Layout::Plain;
  std::uint64_t hash_seed = 0;

  std::uint32_t max_count() const { return (1u << counter_bits) - 1; }
  std::uint64_t block_counters() const { return kBlockBits / counter_bits; }

  void validate() const {
    if (num_counters == 0 || !std::has_single_bit(num_counters))
      throw std::invalid_argument("num_counters must be a power of two");
    if (counter_bits < 2 || counter_bits > 8)
      throw std::invalid_argument("counter_bits must be in [2, 8]");
    if (num_hashes < 1 || num_hashes > kMaxHashes)
      throw std::invalid_argument("num_hashes must be in [1, 32]");
    if (layout == Layout::Blocked) {
      // Only widths that tile a cache line with a power-of-two counter count.
      if (kBlockBits % counter_bits != 0 || !std::has_single_bit(block_counters()))
        throw std::invalid_argument("blocked layout requires counter_bits in {2, 4, 8}");
      if (num_counters % block_counters() != 0)
        throw std::invalid_argument("blocked layout requires num_counters to be a multiple of " +
                                    std::to_string(block_counters()));
    }
  }
};

/// Standard Bloom false-positive estimate (1 - e^(-k n / m))^k.
inline double false_positive_estimate(std::uint64_t n_items, std::uint64_t num_counters,
                                      unsigned k) {
  const double fill = 1.0 - std::exp(-static_cast<double>(k) * static_cast<double>(n_items) /
                                     static_cast<double>(num_counters));
  return std::pow(fill, static_cast<double>(k));
}

/// Smallest power-of-two counter array meeting `fp_rate` for `n_items` keys.
inline SketchConfig size_for(std::uint64_t n_items, double fp_rate, unsigned k = 3) {
  if (!(fp_rate > 0.0 && fp_rate < 1.0))
    throw std::invalid_argument("fp_rate must lie in (0, 1)");
  if (n_items < 1) throw std::invalid_argument("n_items must be at least 1");
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  std::uint64_t m = 1;
  while (false_positive_estimate(n_items, m, k) > fp_rate) {
    if (m > (std::uint64_t{1} << 62)) throw std::invalid_argument("fp_rate unreachable");
    m <<= 1;
  }
  SketchConfig config;
  config.num_counters = m;
  config.counter_bits = 4;
  config.num_hashes = k;
  return config;
}

/// Switches `config` to the blocked layout, growing the array to at least one block.
inline SketchConfig blocked(SketchConfig config) {
  config.layout = Layout::Blocked;
  config.num_counters = std::max(config.num_counters, config.block_counters());
  return config;
}

class CountingBloomFilter {
 public:
  struct Indices {
    std::array<std::uint64_t, SketchConfig::kMaxHashes> slot{};
    unsigned size = 0;
    std::span<const std::uint64_t> view() const { return {slot.data(), size}; }
  };

  explicit CountingBloomFilter(const SketchConfig& config) : config_(config) {
    config_.validate();
    max_count_ = config_.max_count();
    mask_ = (std::uint64_t{1} << config_.counter_bits) - 1;
    words_.assign((config_.num_counters * config_.counter_bits + 63) / 64, 0);
    if (config_.layout == Layout::Blocked) {
      const std::uint64_t blocks = config_.num_counters / config_.block_counters();
      block_shift_ = blocks == 1 ? 64 : 64 - std::countr_zero(blocks);
    }
  }

  const SketchConfig& config() const { return config_; }
  std::uint32_t max_count() const { return max_count_; }

  /// The k counter positions for `page`. Hashing is SplitMix64 double hashing:
  ///   h1 = mix64(page ^ seed), h2 = mix64(h1 ^ rotl(seed, 32) ^ C) | 1.
  /// Plain: (h1 + i*h2) & (m - 1). Blocked: the top bits of h1 pick the
  /// block, then (base + i*step) mod block_counters with an odd step.
  Indices indices(PageId page) const {
    const std::uint64_t h1 = mix64(page ^ config_.hash_seed);
    const std::uint64_t h2 =
        mix64(h1 ^ std::rotl(config_.hash_seed, 32) ^ 0xd6e8feb86659fd93ULL) | 1;
    Indices out;
    out.size = config_.num_hashes;
    if (config_.layout == Layout::Plain) {
      const std::uint64_t mask = config_.num_counters - 1;
      for (unsigned i = 0; i < out.size; ++i) out.slot[i] = (h1 + i * h2) & mask;
    } else {
      const std::uint64_t bc = config_.block_counters();
      const std::uint64_t block = block_shift_ >= 64 ? 0 : h1 >> block_shift_;
      const std::uint64_t base = h2 & (bc - 1);
      const std::uint64_t step = ((h2 >> 32) & (bc - 1)) | 1;
      for (unsigned i = 0; i < out.size; ++i)
        out.slot[i] = block * bc + ((base + i * step) & (bc - 1));
    }
    return out;
  }

  std::vector<std::uint64_t> counter_indices(PageId page) const {
    const Indices idx = indices(page);
    return {idx.view().begin(), idx.view().end()};
  }

  std::uint32_t get(PageId page) const { return min_of(indices(page)); }

  std::uint32_t increment(PageId page) { return increase_by(page, 1); }

  /// Conservative update by `amount`: raises every counter of the page that is
  /// below min(current_min + amount, max_count) to that target. Equivalent to
  /// `amount` sequential increments.
  std::uint32_t increase_by(PageId page, std::uint64_t amount) {
    if (amount == 0) throw std::invalid_argument("increase_by amount must be positive");
    const Indices idx = indices(page);
    const std::uint32_t current = min_of(idx);
    const std::uint64_t raised = std::min<std::uint64_t>(current + amount, max_count_);
    const auto target = static_cast<std::uint32_t>(raised);
    for (const std::uint64_t i : idx.view())
      if (counter(i) < target) set_counter(i, target);
    return target;
  }

  /// Halves every counter (floor).
  void age() {
    const unsigned bits = config_.counter_bits;
    if (64 % bits == 0) {
      std::uint64_t keep = 0;  // clears the bit shifted in from each neighbor
      for (unsigned s = 0; s < 64; s += bits) keep |= (mask_ >> 1) << s;
      for (auto& w : words_) w = (w >> 1) & keep;
      return;
    }
    for (std::uint64_t i = 0; i < config_.num_counters; ++i) set_counter(i, counter(i) >> 1);
  }

  std::uint64_t memory_bytes() const {
    return config_.num_counters * config_.counter_bits / 8;
  }

  std::uint32_t counter(std::uint64_t i) const {
    const std::uint64_t bit = i * config_.counter_bits;
    const std::uint64_t w = bit >> 6;
    const unsigned s = bit & 63;
    std::uint64_t v = words_[w] >> s;
    if (s + config_.counter_bits > 64) v |= words_[w + 1] << (64 - s);
    return static_cast<std::uint32_t>(v & mask_);
  }

  void set_counter(std::uint64_t i, std::uint32_t value) {
    if (value > max_count_) throw std::invalid_argument("counter value exceeds max_count");
    const std::uint64_t bit = i * config_.counter_bits;
    const std::uint64_t w = bit >> 6;
    const unsigned s = bit & 63;
    words_[w] = (words_[w] & ~(mask_ << s)) | (std::uint64_t{value} << s);
    if (s + config_.counter_bits > 64) {
      const unsigned spill = 64 - s;
      words_[w + 1] = (words_[w + 1] & ~(mask_ >> spill)) | (std::uint64_t{value} >> spill);
    }
  }

  std::vector<std::uint8_t> snapshot() const {
    std::vector<std::uint8_t> out(config_.num_counters);
    for (std::uint64_t i = 0; i < config_.num_counters; ++i)
      out[i] = static_cast<std::uint8_t>(counter(i));
    return out;
  }

  /// Number of counters holding each value 0..max_count.
  std::vector<std::uint64_t> histogram() const {
    std::vector<std::uint64_t> out(max_count_ + 1, 0);
    for (std::uint64_t i = 0; i < config_.num_counters; ++i) ++out[counter(i)];
    return out;
  }

  friend bool operator==(const CountingBloomFilter& a, const CountingBloomFilter& b) {
    return a.words_ == b.words_;
  }

 private:
  std::uint32_t min_of(const Indices& idx) const {
    std::uint32_t m = max_count_;
    for (const std::uint64_t i : idx.view()) m = std::min(m, counter(i));
    return m;
  }

  SketchConfig config_;
  std::uint32_t max_count_ = 0;
  std::uint64_t mask_ = 0;
  unsigned block_shift_ = 64;
  std::vector<std::uint64_t> words_;
};

/// Distinct pages of a sample batch with their multiplicities, in order of
/// first appearance.
struct CoalescedBatch {
  std::vector<std::pair<PageId, std::uint64_t>> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

inline CoalescedBatch coalesce(std::span<const PageId> batch) {
  CoalescedBatch out;
  std::unordered_map<PageId, std::size_t> slot;
  slot.reserve(batch.size());
  for (const PageId page : batch) {
    auto [it, inserted] = slot.try_emplace(page, out.entries.size());
    if (inserted)
      out.entries.emplace_back(page, 1);
    else
      ++out.entries[it->second].second;
  }
  return out;
}

}  // namespace freqtier
