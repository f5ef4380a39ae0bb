#pragma once

// Reference policies: an exact per-page counting table that stands in for the
// sketch, the offline frequency-optimal placement, and a scan/hint-fault
// recency policy with LRU demotion.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "freqtier/memsim.hpp"
#include "freqtier/sketch.hpp"

namespace freqtier {

/// Per-page metadata footprint assumed for exact-tracking systems.
inline constexpr std::uint64_t kPerPageMetadataBytes = 168;

/// Exact saturating counter per page; same saturation and aging as the sketch.
class ExactCounterTable {
 public:
  ExactCounterTable(std::uint64_t n_pages, unsigned counter_bits = 4)
      : counts_(n_pages, 0), max_count_((1u << counter_bits) - 1) {
    if (counter_bits < 2 || counter_bits > 8)
      throw std::invalid_argument("counter_bits must be in [2, 8]");
  }

  std::uint32_t get(PageId page) const { return counts_[page]; }

  std::uint32_t increase_by(PageId page, std::uint64_t amount) {
    if (amount == 0) throw std::invalid_argument("increase_by amount must be positive");
    const auto next = std::min<std::uint64_t>(counts_[page] + amount, max_count_);
    counts_[page] = static_cast<std::uint8_t>(next);
    return counts_[page];
  }

  std::uint32_t increment(PageId page) { return increase_by(page, 1); }

  void age() {
    for (auto& c : counts_) c >>= 1;
  }

  std::uint32_t max_count() const { return max_count_; }
  std::uint64_t memory_bytes() const { return counts_.size(); }

 private:
  std::vector<std::uint8_t> counts_;
  std::uint32_t max_count_;
};

/// Pages that hold the `capacity` largest access counts (ties: lower id first).
inline std::vector<PageId> ideal_resident_set(std::span<const PageId> pages,
                                              std::uint64_t n_pages, std::uint64_t capacity) {
  std::vector<std::uint64_t> counts(n_pages, 0);
  for (const PageId p : pages) ++counts[p];
  std::vector<PageId> touched;
  for (PageId p = 0; p < n_pages; ++p)
    if (counts[p] > 0) touched.push_back(p);
  const auto keep = std::min<std::size_t>(capacity, touched.size());
  const auto hotter = [&](PageId a, PageId b) {
    return counts[a] != counts[b] ? counts[a] > counts[b] : a < b;
  };
  std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(keep),
                    touched.end(), hotter);
  touched.resize(keep);
  std::sort(touched.begin(), touched.end());
  return touched;
}

/// Hit ratio of the best static placement with full knowledge of the trace.
inline double offline_ideal(std::span<const PageId> pages, std::uint64_t n_pages,
                            std::uint64_t local_capacity_pages) {
  if (pages.empty()) return 0.0;
  std::vector<std::uint8_t> resident(n_pages, 0);
  for (const PageId p : ideal_resident_set(pages, n_pages, local_capacity_pages)) resident[p] = 1;
  std::uint64_t hits = 0;
  for (const PageId p : pages) hits += resident[p];
  return static_cast<double>(hits) / static_cast<double>(pages.size());
}

struct RecencyConfig {
  std::uint64_t scan_window_pages = 65'536;  // 256 MiB of 4 KiB pages
  std::uint64_t scan_period_accesses = 0;    // 0 = one policy window
  std::uint64_t hot_latency_ticks = 0;       // 0 = one policy window
  std::uint64_t lru_demote_batch = 0;        // 0 = 2% of local capacity
  bool require_active = false;               // promote only recently re-accessed pages

  /// Replaces zero defaults and clamps the scan window to the page space.
  RecencyConfig resolved(std::uint64_t n_pages, std::uint64_t local_capacity_pages,
                         std::uint64_t window_accesses) const {
    RecencyConfig r = *this;
    r.scan_window_pages = std::min(r.scan_window_pages, n_pages);
    if (r.scan_period_accesses == 0) r.scan_period_accesses = window_accesses;
    if (r.hot_latency_ticks == 0) r.hot_latency_ticks = window_accesses;
    if (r.lru_demote_batch == 0)
      r.lru_demote_batch = std::max<std::uint64_t>(1, local_capacity_pages / 50);
    return r;
  }

  /// Hot latency of 1/60 window: one second against a one-minute scan period.
  static RecencyConfig desk_scale(std::uint64_t window_accesses) {
    RecencyConfig c;
    c.hot_latency_ticks = std::max<std::uint64_t>(1, window_accesses / 60);
    return c;
  }

  void validate(std::uint64_t n_pages) const {
    if (scan_window_pages < 1 || scan_period_accesses < 1 || hot_latency_ticks < 1 ||
        lru_demote_batch < 1)
      throw std::invalid_argument("recency parameters must be positive");
    if (scan_window_pages > n_pages)
      throw std::invalid_argument("scan_window_pages must not exceed n_pages");
  }
};

struct PromotionEvent {
  std::uint64_t tick = 0;
  PageId page = 0;
  std::uint64_t scan_round = 0;
  friend bool operator==(const PromotionEvent&, const PromotionEvent&) = default;
};

/// Scan-and-fault recency tiering. A scan pointer unmaps a window of pages
/// each period; only the first access after an unmap is seen, and it promotes
/// the page when it came soon enough after the unmap. Local pages are kept in
/// exact LRU order for demotion.
class RecencyEngine {
 public:
  static constexpr std::uint64_t kNone = ~std::uint64_t{0};

  RecencyEngine(const RecencyConfig& config, Watermarks watermarks, std::uint64_t n_pages)
      : config_(config), watermarks_(watermarks), n_pages_(n_pages),
        unmap_tick_(n_pages, kNone), last_access_(n_pages, kNone), prev_(n_pages, kNone),
        next_(n_pages, kNone), in_lru_(n_pages, 0) {
    config_.validate(n_pages);
  }

  /// Observes one access already served by `state`.
  void on_access(TierState& state, PageId page) {
    const std::uint64_t tick = state.tick();
    if (state.residency(page) == Tier::Local) touch(page);

    if (unmap_tick_[page] != kNone) {
      const std::uint64_t latency = tick - unmap_tick_[page];
      unmap_tick_[page] = kNone;
      ++hint_faults_;
      const bool active = !config_.require_active ||
                          (last_access_[page] != kNone &&
                           tick - last_access_[page] < config_.hot_latency_ticks);
      if (latency < config_.hot_latency_ticks && active && state.residency(page) == Tier::Cxl)
        promote(state, page, tick);
    }
    last_access_[page] = tick;

    if (tick % config_.scan_period_accesses == 0) scan(state, tick);
  }

  const std::vector<PromotionEvent>& promotions() const { return events_; }
  std::uint64_t scan_round() const { return scan_round_; }
  std::uint64_t hint_faults() const { return hint_faults_; }
  std::uint64_t lru_size() const { return lru_size_; }
  std::uint64_t window_promotions() const { return window_promotions_; }
  std::uint64_t window_demotions() const { return window_demotions_; }
  void reset_window() { window_promotions_ = window_demotions_ = 0; }

  /// Local pages from least to most recently accessed.
  std::vector<PageId> lru_order() const {
    std::vector<PageId> out;
    for (PageId p = tail_; p != kNone; p = prev_[p]) out.push_back(p);
    return out;
  }

 private:
  void promote(TierState& state, PageId page, std::uint64_t tick) {
    if (state.below_promo_watermark(watermarks_) || state.free_local_pages() == 0)
      demote_lru(state);
    if (state.promote(std::span<const PageId>(&page, 1)).moved == 0) return;
    touch(page);
    events_.push_back({tick, page, scan_round_});
    ++window_promotions_;
  }

  void demote_lru(TierState& state) {
    std::vector<PageId> victims;
    for (PageId p = tail_; p != kNone && victims.size() < config_.lru_demote_batch; p = prev_[p])
      victims.push_back(p);
    for (const PageId p : victims) unlink(p);
    window_demotions_ += state.demote(victims).moved;
  }

  void scan(const TierState& state, std::uint64_t tick) {
    ++scan_round_;
    for (std::uint64_t i = 0; i < config_.scan_window_pages; ++i) {
      if (state.residency(scan_cursor_) != Tier::Unallocated) unmap_tick_[scan_cursor_] = tick;
      scan_cursor_ = scan_cursor_ + 1 == n_pages_ ? 0 : scan_cursor_ + 1;
    }
  }

  void touch(PageId page) {
    if (in_lru_[page]) {
      if (head_ == page) return;
      unlink(page);
    }
    prev_[page] = kNone;
    next_[page] = head_;
    if (head_ != kNone) prev_[head_] = page;
    head_ = page;
    if (tail_ == kNone) tail_ = page;
    in_lru_[page] = 1;
    ++lru_size_;
  }

  void unlink(PageId page) {
    if (prev_[page] != kNone) next_[prev_[page]] = next_[page]; else head_ = next_[page];
    if (next_[page] != kNone) prev_[next_[page]] = prev_[page]; else tail_ = prev_[page];
    prev_[page] = next_[page] = kNone;
    in_lru_[page] = 0;
    --lru_size_;
  }

  RecencyConfig config_;
  Watermarks watermarks_;
  std::uint64_t n_pages_;
  std::vector<std::uint64_t> unmap_tick_;
  std::vector<std::uint64_t> last_access_;
  std::vector<PageId> prev_, next_;
  std::vector<std::uint8_t> in_lru_;
  PageId head_ = kNone, tail_ = kNone;
  std::uint64_t lru_size_ = 0;
  PageId scan_cursor_ = 0;
  std::uint64_t scan_round_ = 0;
  std::uint64_t hint_faults_ = 0;
  std::uint64_t window_promotions_ = 0;
  std::uint64_t window_demotions_ = 0;
  std::vector<PromotionEvent> events_;
};

}  // namespace freqtier
