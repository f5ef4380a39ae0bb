#pragma once

// Two-tier memory model: per-page residency with first-touch allocation,
// access and migration tallies, watermarks and a coarse latency model.

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "freqtier/sketch.hpp"

namespace freqtier {

enum class Tier : std::uint8_t { Unallocated, Local, Cxl };

inline std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::Unallocated: return "unallocated";
    case Tier::Local: return "local";
    case Tier::Cxl: return "cxl";
  }
  return "?";
}

inline constexpr std::uint64_t kPageBytes = 4096;
inline constexpr std::uint64_t kAccessBytes = 64;

/// Free-page thresholds on local memory. Demotion starts when free pages drop
/// below `promo_wmark_pages` and runs until free pages exceed `demote_wmark_pages`.
struct Watermarks {
  std::uint64_t promo_wmark_pages = 0;
  std::uint64_t demote_wmark_pages = 1;

  /// 1% / 3% of local capacity.
  static Watermarks defaults_for(std::uint64_t local_capacity_pages) {
    Watermarks w;
    w.promo_wmark_pages = local_capacity_pages / 100;
    w.demote_wmark_pages = std::max(w.promo_wmark_pages + 1, local_capacity_pages * 3 / 100);
    if (local_capacity_pages < 2) w = Watermarks{0, 0};
    return w;
  }

  void validate(std::uint64_t local_capacity_pages) const {
    if (local_capacity_pages < 2) {
      if (promo_wmark_pages != 0 || demote_wmark_pages != 0)
        throw std::invalid_argument("watermarks must be zero for a single local page");
      return;
    }
    if (demote_wmark_pages <= promo_wmark_pages)
      throw std::invalid_argument("demote watermark must exceed promo watermark");
    if (demote_wmark_pages >= local_capacity_pages)
      throw std::invalid_argument("watermarks must be below local capacity");
  }
};

struct LatencyModel {
  double local_latency_ns = 100.0;
  double cxl_extra_ns = 75.0;
  double cxl_bandwidth_fraction = 1.0;
  double page_copy_ns = 2000.0;

  static LatencyModel cxl1() { return {}; }
  static LatencyModel cxl2() {
    LatencyModel m;
    m.cxl_bandwidth_fraction = 0.25;
    return m;
  }

  void validate() const {
    if (!(local_latency_ns > 0 && cxl_extra_ns > 0 && page_copy_ns > 0))
      throw std::invalid_argument("latency model values must be positive");
    if (!(cxl_bandwidth_fraction > 0 && cxl_bandwidth_fraction <= 1))
      throw std::invalid_argument("cxl_bandwidth_fraction must lie in (0, 1]");
  }
};

struct MigrationResult {
  std::uint64_t moved = 0;
  std::uint64_t skipped_resident = 0;  // already on the destination tier
  std::uint64_t skipped_capacity = 0;  // promotion only: no free local page
};

class TierState {
 public:
  TierState(std::uint64_t n_pages, std::uint64_t local_capacity_pages)
      : residency_(n_pages, Tier::Unallocated), capacity_(local_capacity_pages),
        free_(local_capacity_pages) {
    if (n_pages == 0) throw std::invalid_argument("n_pages must be at least 1");
  }

  std::uint64_t n_pages() const { return residency_.size(); }
  std::uint64_t local_capacity_pages() const { return capacity_; }
  std::uint64_t free_local_pages() const { return free_; }
  Tier residency(PageId page) const { return residency_[page]; }

  std::uint64_t local_accesses() const { return local_accesses_; }
  std::uint64_t cxl_accesses() const { return cxl_accesses_; }
  std::uint64_t promoted_pages() const { return promoted_; }
  std::uint64_t demoted_pages() const { return demoted_; }
  std::uint64_t tick() const { return tick_; }

  double hit_ratio() const {
    const std::uint64_t total = local_accesses_ + cxl_accesses_;
    return total == 0 ? 0.0 : static_cast<double>(local_accesses_) / static_cast<double>(total);
  }

  /// Serves one access, allocating the page on first touch (local if any
  /// page is free). Returns the tier that served it.
  Tier access(PageId page) {
    if (page >= residency_.size())
      throw std::invalid_argument("page " + std::to_string(page) + " out of range");
    Tier& tier = residency_[page];
    if (tier == Tier::Unallocated) tier = allocate();
    if (tier == Tier::Local)
      ++local_accesses_;
    else
      ++cxl_accesses_;
    ++tick_;
    return tier;
  }

  /// Places an unallocated page without counting an access. For offline setups.
  void place(PageId page, Tier tier) {
    if (page >= residency_.size()) throw std::invalid_argument("page out of range");
    if (residency_[page] != Tier::Unallocated)
      throw std::invalid_argument("page " + std::to_string(page) + " already placed");
    if (tier == Tier::Local) {
      if (free_ == 0) throw std::invalid_argument("no free local page to place into");
      --free_;
    }
    residency_[page] = tier;
  }

  MigrationResult promote(std::span<const PageId> pages) {
    check_allocated(pages);
    MigrationResult r;
    for (const PageId p : pages) {
      if (residency_[p] == Tier::Local) {
        ++r.skipped_resident;
      } else if (free_ == 0) {
        ++r.skipped_capacity;
      } else {
        residency_[p] = Tier::Local;
        --free_;
        ++r.moved;
      }
    }
    promoted_ += r.moved;
    return r;
  }

  MigrationResult demote(std::span<const PageId> pages) {
    check_allocated(pages);
    MigrationResult r;
    for (const PageId p : pages) {
      if (residency_[p] != Tier::Local) {
        ++r.skipped_resident;
      } else {
        residency_[p] = Tier::Cxl;
        ++free_;
        ++r.moved;
      }
    }
    demoted_ += r.moved;
    return r;
  }

  bool below_promo_watermark(const Watermarks& w) const { return free_ < w.promo_wmark_pages; }
  bool above_demote_watermark(const Watermarks& w) const { return free_ > w.demote_wmark_pages; }

  std::uint64_t local_bytes() const { return local_accesses_ * kAccessBytes; }
  std::uint64_t cxl_bytes() const { return cxl_accesses_ * kAccessBytes; }
  std::uint64_t migration_bytes() const { return (promoted_ + demoted_) * kPageBytes; }

 private:
  Tier allocate() {
    if (free_ > 0) {
      --free_;
      return Tier::Local;
    }
    return Tier::Cxl;
  }

  void check_allocated(std::span<const PageId> pages) const {
    for (const PageId p : pages) {
      if (p >= residency_.size() || residency_[p] == Tier::Unallocated)
        throw std::invalid_argument("page " + std::to_string(p) + " is not allocated");
    }
  }

  std::vector<Tier> residency_;
  std::uint64_t capacity_;
  std::uint64_t free_;
  std::uint64_t local_accesses_ = 0;
  std::uint64_t cxl_accesses_ = 0;
  std::uint64_t promoted_ = 0;
  std::uint64_t demoted_ = 0;
  std::uint64_t tick_ = 0;
};

/// Coarse run-time estimate in nanoseconds, for ranking policies only.
inline double estimate_time(const TierState& state, const LatencyModel& model) {
  const double local = static_cast<double>(state.local_accesses()) * model.local_latency_ns;
  const double cxl = static_cast<double>(state.cxl_accesses()) *
                     (model.local_latency_ns + model.cxl_extra_ns) / model.cxl_bandwidth_fraction;
  const double copies =
      static_cast<double>(state.promoted_pages() + state.demoted_pages()) * model.page_copy_ns;
  return local + cxl + copies;
}

}  // namespace freqtier
