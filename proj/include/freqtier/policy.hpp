#pragma once

// Frequency-based tiering policy: sampled accesses feed a frequency tracker
// in batches; hot pages are promoted, cold local pages are found by a
// checkpointed address-order scan, and sampling intensity follows the
// stability of the local hit ratio.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "freqtier/memsim.hpp"
#include "freqtier/random.hpp"
#include "freqtier/sketch.hpp"

namespace freqtier {

/// What the policy needs from a per-page frequency store.
template <typename T>
concept FrequencyTracker = requires(T t, const T ct, PageId p, std::uint64_t n) {
  { ct.get(p) } -> std::convertible_to<std::uint32_t>;
  { t.increase_by(p, n) } -> std::convertible_to<std::uint32_t>;
  { t.age() };
  { ct.max_count() } -> std::convertible_to<std::uint32_t>;
  { ct.memory_bytes() } -> std::convertible_to<std::uint64_t>;
};

static_assert(FrequencyTracker<CountingBloomFilter>);

enum class MachineState : std::uint8_t { Promoting, Demoting, Monitoring };

inline std::string_view to_string(MachineState s) {
  switch (s) {
    case MachineState::Promoting: return "promoting";
    case MachineState::Demoting: return "demoting";
    case MachineState::Monitoring: return "monitoring";
  }
  return "?";
}

/// The only state-machine edges the engine may take.
inline bool is_allowed_transition(MachineState from, MachineState to) {
  using S = MachineState;
  return (from == S::Promoting && to == S::Demoting) ||
         (from == S::Demoting && to == S::Promoting) ||
         (from == S::Promoting && to == S::Monitoring) ||
         (from == S::Monitoring && to == S::Promoting);
}

struct PolicyConfig {
  std::uint32_t hot_threshold_init = 5;
  std::uint64_t batch_size = 100'000;
  std::vector<double> sampling_probs = {1e-3, 1e-4, 1e-5};
  std::uint64_t window_accesses = 1'000'000;
  double stability_delta = 0.005;
  std::uint64_t stable_windows = 3;
  std::uint64_t aging_interval_batches = 10;
  double hot_set_tolerance = 0.10;
  std::uint64_t max_scan_pages_per_trigger = 0;  // 0 = one full lap
  bool adaptive_threshold = true;
  bool record_decisions = false;

  /// Rates for traces of ~10^7-10^8 accesses. The defaults model hardware
  /// sampling at 10^9+ accesses and fill no batch on a trace that short.
  static PolicyConfig desk_scale() {
    PolicyConfig c;
    c.sampling_probs = {1.0, 0.3, 0.1};
    c.aging_interval_batches = 40;
    return c;
  }

  void validate(std::uint32_t max_count) const {
    if (hot_threshold_init < 1 || hot_threshold_init > max_count)
      throw std::invalid_argument("hot_threshold_init must lie in [1, max_count]");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (sampling_probs.empty()) throw std::invalid_argument("sampling_probs must not be empty");
    for (std::size_t i = 0; i < sampling_probs.size(); ++i) {
      if (!(sampling_probs[i] > 0.0 && sampling_probs[i] <= 1.0))
        throw std::invalid_argument("sampling probabilities must lie in (0, 1]");
      if (i > 0 && !(sampling_probs[i] < sampling_probs[i - 1]))
        throw std::invalid_argument("sampling probabilities must be strictly descending");
    }
    if (window_accesses < 1) throw std::invalid_argument("window_accesses must be at least 1");
    if (!(stability_delta >= 0.0)) throw std::invalid_argument("stability_delta must be >= 0");
    if (stable_windows < 1) throw std::invalid_argument("stable_windows must be at least 1");
    if (aging_interval_batches < 1)
      throw std::invalid_argument("aging_interval_batches must be at least 1");
    if (!(hot_set_tolerance >= 0.0 && hot_set_tolerance < 1.0))
      throw std::invalid_argument("hot_set_tolerance must lie in [0, 1)");
  }
};

struct Transition {
  std::uint64_t tick = 0;
  MachineState from = MachineState::Promoting;
  MachineState to = MachineState::Promoting;
  std::string reason;
};

struct Decision {
  enum class Kind : std::uint8_t { Promote, Demote };
  std::uint64_t tick = 0;
  PageId page = 0;
  std::uint32_t frequency = 0;
  std::uint32_t threshold = 0;
  Kind kind = Kind::Promote;

  friend bool operator==(const Decision&, const Decision&) = default;
};

struct WindowRecord {
  std::uint64_t index = 0;
  std::uint64_t accesses = 0;
  std::uint64_t local_accesses = 0;
  double hit_ratio = 0.0;
  std::uint64_t promotions = 0;
  std::uint64_t demotions = 0;
  std::uint64_t samples = 0;
  std::uint32_t sampling_level = 0;  // level in effect after the window closed
  MachineState machine_state = MachineState::Promoting;
  std::uint32_t hot_threshold = 0;
};

struct BatchSummary {
  std::uint64_t distinct_pages = 0;
  std::uint64_t candidates = 0;
  std::uint64_t promoted = 0;
  std::uint64_t skipped_capacity = 0;
  std::uint64_t scanned = 0;
  std::uint64_t demoted = 0;
  bool aged = false;
  std::uint32_t hot_threshold = 0;
};

struct ScanResult {
  std::uint64_t scanned = 0;
  std::uint64_t demoted = 0;
  bool empty_lap = false;
};

struct PolicyCounters {
  std::uint64_t samples = 0;
  std::uint64_t batches = 0;
  std::uint64_t agings = 0;
  std::uint64_t tracker_updates = 0;        // increase_by calls actually issued
  std::uint64_t uncoalesced_updates = 0;    // increments without coalescing
  std::uint64_t scanned_pages = 0;
  std::uint64_t skipped_capacity = 0;
};

template <FrequencyTracker Tracker>
class PolicyEngine {
 public:
  PolicyEngine(PolicyConfig config, Tracker tracker, Watermarks watermarks,
               std::uint64_t n_pages, std::uint64_t local_capacity_pages, std::uint64_t seed)
      : config_(std::move(config)), tracker_(std::move(tracker)), watermarks_(watermarks),
        n_pages_(n_pages), capacity_(local_capacity_pages), rng_(seed) {
    config_.validate(tracker_.max_count());
    watermarks_.validate(capacity_);
    if (n_pages_ == 0) throw std::invalid_argument("n_pages must be at least 1");
    hot_threshold_ = config_.hot_threshold_init;
    hot_member_.assign(n_pages_, 0);
    observed_.assign(n_pages_, 0);
    batch_.reserve(std::min<std::uint64_t>(config_.batch_size, 1u << 20));
    redraw_gap();
  }

  /// Observes one access already served by `state`.
  void on_access(TierState& state, PageId page) {
    if (machine_state_ != MachineState::Monitoring) {
      if (gap_ == 0) {
        batch_.push_back(page);
        ++counters_.samples;
        ++window_samples_;
        if (batch_.size() >= config_.batch_size) process_batch(state);
        redraw_gap();
      } else {
        --gap_;
      }
    }
    if (++window_seen_ == config_.window_accesses) window_tick(state);
  }

  BatchSummary process_batch(TierState& state) {
    BatchSummary summary;
    if (batch_.empty()) return summary;
    const CoalescedBatch coalesced = coalesce(batch_);
    summary.distinct_pages = coalesced.size();
    promote_buf_.clear();
    for (const auto& [page, count] : coalesced.entries) {
      const std::uint32_t freq = tracker_.increase_by(page, count);
      ++counters_.tracker_updates;
      counters_.uncoalesced_updates += count;
      observed_[page] = 1;
      if (freq < hot_threshold_) continue;
      add_hot(page);
      if (state.residency(page) == Tier::Cxl) {
        promote_buf_.push_back(page);
        log_decision(state, page, freq, Decision::Kind::Promote);
      }
    }
    summary.candidates = promote_buf_.size();
    // Demotion keeps free pages above the promo watermark before and after
    // the batch's promotions are applied.
    if (!promote_buf_.empty()) reclaim(state, summary, true);
    const MigrationResult promoted = state.promote(promote_buf_);
    summary.promoted = promoted.moved;
    summary.skipped_capacity = promoted.skipped_capacity;
    counters_.skipped_capacity += promoted.skipped_capacity;
    window_promotions_ += promoted.moved;
    reclaim(state, summary, promoted.skipped_capacity > 0);

    ++counters_.batches;
    const bool aging_due = counters_.batches % config_.aging_interval_batches == 0;
    summary.hot_threshold = update_hot_threshold(aging_due);
    if (aging_due) {
      tracker_.age();
      ++counters_.agings;
      clear_hot_set();
      summary.aged = true;
    }
    batch_.clear();
    return summary;
  }

  /// Address-order scan from the checkpoint, demoting local pages colder than
  /// the threshold until free pages exceed the demote watermark or a lap ends.
  ScanResult demotion_scan(TierState& state) {
    ScanResult result;
    const std::uint64_t lap = config_.max_scan_pages_per_trigger == 0
                                  ? n_pages_
                                  : std::min(n_pages_, config_.max_scan_pages_per_trigger);
    demote_buf_.clear();
    PageId cursor = checkpoint_;
    const std::uint64_t free_before = state.free_local_pages();
    while (result.scanned < lap) {
      if (free_before + demote_buf_.size() > watermarks_.demote_wmark_pages) break;
      if (state.residency(cursor) == Tier::Local) {
        const std::uint32_t freq = tracker_.get(cursor);
        if (freq < hot_threshold_) {
          demote_buf_.push_back(cursor);
          log_decision(state, cursor, freq, Decision::Kind::Demote);
        }
      }
      cursor = cursor + 1 == n_pages_ ? 0 : cursor + 1;
      ++result.scanned;
    }
    checkpoint_ = cursor;
    result.demoted = state.demote(demote_buf_).moved;
    result.empty_lap = result.scanned == n_pages_ && result.demoted == 0;
    counters_.scanned_pages += result.scanned;
    window_demotions_ += result.demoted;
    return result;
  }

  /// Keeps the number of hot pages near local capacity. The hot set only
  /// grows between agings, so a small one says nothing until the interval is
  /// complete; lowering waits for `interval_complete`.
  std::uint32_t update_hot_threshold(bool interval_complete = true) {
    if (!config_.adaptive_threshold) return hot_threshold_;
    const auto hot = static_cast<double>(hot_pages_.size());
    const auto cap = static_cast<double>(capacity_);
    if (hot > cap * (1.0 + config_.hot_set_tolerance)) {
      if (hot_threshold_ < tracker_.max_count()) {
        ++hot_threshold_;
        refilter_hot_set();
      }
    } else if (interval_complete && hot < cap * (1.0 - config_.hot_set_tolerance) &&
               hot_threshold_ > 1) {
      --hot_threshold_;
    }
    return hot_threshold_;
  }

  /// Closes the current window: records its hit ratio and adjusts intensity.
  void window_tick(const TierState& state) {
    WindowRecord rec = close_window(state);
    history_.push_back(rec.hit_ratio);

    if (machine_state_ == MachineState::Monitoring) {
      if (!hit_ratio_stable()) {
        transition(state, MachineState::Promoting, "hit ratio unstable");
        set_level(0);
      }
    } else if (window_promotions_ == 0 && counters_.batches > window_batches_start_) {
      // Promotion plateau is checked before stability.
      transition(state, MachineState::Monitoring, "promotion plateau");
    } else if (hit_ratio_stable()) {
      if (level_ + 1 >= config_.sampling_probs.size())
        transition(state, MachineState::Monitoring, "stable at lowest sampling level");
      else
        set_level(level_ + 1);
    } else if (level_ > 0) {
      set_level(level_ - 1);
    }

    rec.sampling_level = level_;
    rec.machine_state = machine_state_;
    rec.hot_threshold = hot_threshold_;
    windows_.push_back(rec);
    reset_window(state);
  }

  /// Records a trailing partial window without any policy reaction.
  void finish(const TierState& state) {
    if (window_seen_ == 0) return;
    WindowRecord rec = close_window(state);
    rec.sampling_level = level_;
    rec.machine_state = machine_state_;
    rec.hot_threshold = hot_threshold_;
    windows_.push_back(rec);
    reset_window(state);
  }

  const PolicyConfig& config() const { return config_; }
  const Tracker& tracker() const { return tracker_; }
  Tracker& tracker() { return tracker_; }
  const Watermarks& watermarks() const { return watermarks_; }
  std::uint32_t hot_threshold() const { return hot_threshold_; }
  std::size_t hot_set_size() const { return hot_pages_.size(); }
  bool in_hot_set(PageId p) const { return hot_member_[p] != 0; }
  PageId demotion_checkpoint() const { return checkpoint_; }
  std::uint32_t sampling_level() const { return level_; }
  double sampling_probability() const { return config_.sampling_probs[level_]; }
  MachineState machine_state() const { return machine_state_; }
  std::span<const PageId> batch() const { return batch_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const std::vector<Decision>& decisions() const { return decisions_; }
  const std::vector<WindowRecord>& windows() const { return windows_; }
  const PolicyCounters& counters() const { return counters_; }
  bool observed(PageId p) const { return observed_[p] != 0; }

  // Direct state setters for tests and hand-built scenarios.
  void set_hot_threshold(std::uint32_t t) {
    if (t < 1 || t > tracker_.max_count()) throw std::invalid_argument("threshold out of range");
    hot_threshold_ = t;
  }
  void set_demotion_checkpoint(PageId p) { checkpoint_ = p % n_pages_; }
  void add_sample(PageId p) { batch_.push_back(p); }

  /// Histogram of tracker values over every page that was ever sampled.
  std::vector<std::uint64_t> observed_histogram() const {
    std::vector<std::uint64_t> hist(tracker_.max_count() + 1, 0);
    for (PageId p = 0; p < n_pages_; ++p)
      if (observed_[p]) ++hist[tracker_.get(p)];
    return hist;
  }

 private:
  void reclaim(TierState& state, BatchSummary& summary, bool demand) {
    if (machine_state_ == MachineState::Monitoring || !state.below_promo_watermark(watermarks_))
      return;
    transition(state, MachineState::Demoting, "free below promo watermark");
    const ScanResult scan = demotion_scan(state);
    summary.scanned += scan.scanned;
    summary.demoted += scan.demoted;
    transition(state, MachineState::Promoting,
               scan.empty_lap ? "demotion scan exhausted" : "free above demote watermark");
    if (!scan.empty_lap) return;
    // Nothing local is colder than the threshold while hotter pages wait on
    // the slow tier: the threshold no longer separates them.
    if (demand && config_.adaptive_threshold && hot_threshold_ < tracker_.max_count()) {
      ++hot_threshold_;
      refilter_hot_set();
      return;
    }
    transition(state, MachineState::Monitoring, "empty demotion scan");
  }

  void redraw_gap() { gap_ = geometric_gap(rng_, config_.sampling_probs[level_]); }

  void set_level(std::uint32_t level) {
    if (level == level_) return;
    level_ = level;
    redraw_gap();
  }

  bool hit_ratio_stable() const {
    if (history_.size() < config_.stable_windows) return false;
    const auto first = history_.end() - static_cast<std::ptrdiff_t>(config_.stable_windows);
    const auto [lo, hi] = std::minmax_element(first, history_.end());
    return *hi - *lo <= 2.0 * config_.stability_delta;
  }

  void transition(const TierState& state, MachineState to, std::string reason) {
    if (to == machine_state_) return;
    if (!is_allowed_transition(machine_state_, to))
      throw std::logic_error("illegal state transition");
    transitions_.push_back({state.tick(), machine_state_, to, std::move(reason)});
    machine_state_ = to;
  }

  void log_decision(const TierState& state, PageId page, std::uint32_t freq,
                    Decision::Kind kind) {
    if (config_.record_decisions)
      decisions_.push_back({state.tick(), page, freq, hot_threshold_, kind});
  }

  void add_hot(PageId page) {
    if (hot_member_[page]) return;
    hot_member_[page] = 1;
    hot_pages_.push_back(page);
  }

  void clear_hot_set() {
    for (const PageId p : hot_pages_) hot_member_[p] = 0;
    hot_pages_.clear();
  }

  void refilter_hot_set() {
    std::size_t kept = 0;
    for (const PageId p : hot_pages_) {
      if (tracker_.get(p) >= hot_threshold_)
        hot_pages_[kept++] = p;
      else
        hot_member_[p] = 0;
    }
    hot_pages_.resize(kept);
  }

  WindowRecord close_window(const TierState& state) const {
    WindowRecord rec;
    rec.index = windows_.size();
    rec.accesses = (state.local_accesses() + state.cxl_accesses()) - window_start_total_;
    rec.local_accesses = state.local_accesses() - window_start_local_;
    rec.hit_ratio = rec.accesses == 0 ? 0.0
                                      : static_cast<double>(rec.local_accesses) /
                                            static_cast<double>(rec.accesses);
    rec.promotions = window_promotions_;
    rec.demotions = window_demotions_;
    rec.samples = window_samples_;
    return rec;
  }

  void reset_window(const TierState& state) {
    window_seen_ = 0;
    window_samples_ = 0;
    window_promotions_ = 0;
    window_demotions_ = 0;
    window_batches_start_ = counters_.batches;
    window_start_local_ = state.local_accesses();
    window_start_total_ = state.local_accesses() + state.cxl_accesses();
  }

  PolicyConfig config_;
  Tracker tracker_;
  Watermarks watermarks_;
  std::uint64_t n_pages_;
  std::uint64_t capacity_;
  Rng rng_;

  std::uint32_t hot_threshold_ = 1;
  std::uint32_t level_ = 0;
  MachineState machine_state_ = MachineState::Promoting;
  PageId checkpoint_ = 0;
  std::uint64_t gap_ = 0;

  std::vector<PageId> batch_;
  std::vector<PageId> promote_buf_;
  std::vector<PageId> demote_buf_;
  std::vector<PageId> hot_pages_;
  std::vector<std::uint8_t> hot_member_;
  std::vector<std::uint8_t> observed_;

  std::vector<double> history_;
  std::vector<WindowRecord> windows_;
  std::vector<Transition> transitions_;
  std::vector<Decision> decisions_;
  PolicyCounters counters_;

  std::uint64_t window_seen_ = 0;
  std::uint64_t window_samples_ = 0;
  std::uint64_t window_promotions_ = 0;
  std::uint64_t window_demotions_ = 0;
  std::uint64_t window_batches_start_ = 0;
  std::uint64_t window_start_local_ = 0;
  std::uint64_t window_start_total_ = 0;
};

}  // namespace freqtier
