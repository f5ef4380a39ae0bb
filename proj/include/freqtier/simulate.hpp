#pragma once

// Whole-run drivers: stream a trace through one policy against a fresh tier
// state and produce a SimReport.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "freqtier/baselines.hpp"
#include "freqtier/memsim.hpp"
#include "freqtier/policy.hpp"
#include "freqtier/report.hpp"
#include "freqtier/sketch.hpp"
#include "freqtier/trace.hpp"

namespace freqtier {

enum class PolicyKind { FreqTier, ExactLfu, Recency, Ideal };

inline std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::FreqTier: return "freqtier";
    case PolicyKind::ExactLfu: return "exact-lfu";
    case PolicyKind::Recency: return "recency";
    case PolicyKind::Ideal: return "ideal";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view name) {
  if (name == "freqtier") return PolicyKind::FreqTier;
  if (name == "exact-lfu") return PolicyKind::ExactLfu;
  if (name == "recency") return PolicyKind::Recency;
  if (name == "ideal") return PolicyKind::Ideal;
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

struct SketchSizing {
  std::optional<std::uint64_t> num_counters;  // unset: size for local capacity
  std::optional<std::uint64_t> n_items;       // unset: local capacity pages
  double fp_rate = 1e-3;
  unsigned counter_bits = 4;
  unsigned num_hashes = 3;
  Layout layout = Layout::Plain;
  std::optional<std::uint64_t> hash_seed;     // unset: derived from the run seed
};

struct SimConfig {
  PolicyKind policy = PolicyKind::FreqTier;
  std::uint64_t local_pages = 1;
  std::optional<Watermarks> watermarks;  // unset: 1% / 3% of local capacity
  PolicyConfig policy_config;
  SketchSizing sketch;
  LatencyModel latency;
  std::string latency_preset = "cxl1";
  RecencyConfig recency;
  std::uint64_t seed = 1;
};

inline Watermarks resolved_watermarks(const SimConfig& c) {
  return c.watermarks.value_or(Watermarks::defaults_for(c.local_pages));
}

inline SketchConfig resolved_sketch(const SimConfig& c) {
  const SketchSizing& s = c.sketch;
  SketchConfig cfg;
  if (s.num_counters) {
    cfg.num_counters = *s.num_counters;
  } else {
    cfg = size_for(s.n_items.value_or(c.local_pages), s.fp_rate, s.num_hashes);
  }
  cfg.counter_bits = s.counter_bits;
  cfg.num_hashes = s.num_hashes;
  cfg.hash_seed = s.hash_seed.value_or(mix64(c.seed ^ 0x5ca1ab1eULL));
  if (s.layout == Layout::Blocked && !s.num_counters) cfg = blocked(cfg);
  cfg.layout = s.layout;
  cfg.validate();
  return cfg;
}

/// Every resolved parameter of a run; enough to reproduce it.
inline ordered_json config_echo(const SimConfig& c, std::uint64_t n_pages) {
  ordered_json j;
  j["policy"] = to_string(c.policy);
  j["seed"] = c.seed;
  j["local_pages"] = c.local_pages;
  j["n_pages"] = n_pages;
  const Watermarks w = resolved_watermarks(c);
  j["watermarks"] = {{"promo_wmark_pages", w.promo_wmark_pages},
                     {"demote_wmark_pages", w.demote_wmark_pages}};
  const PolicyConfig& p = c.policy_config;
  j["policy_config"] = {{"hot_threshold_init", p.hot_threshold_init},
                        {"batch_size", p.batch_size},
                        {"sampling_probs", p.sampling_probs},
                        {"window_accesses", p.window_accesses},
                        {"stability_delta", p.stability_delta},
                        {"stable_windows", p.stable_windows},
                        {"aging_interval_batches", p.aging_interval_batches},
                        {"hot_set_tolerance", p.hot_set_tolerance},
                        {"max_scan_pages_per_trigger",
                         p.max_scan_pages_per_trigger == 0 ? n_pages : p.max_scan_pages_per_trigger},
                        {"adaptive_threshold", p.adaptive_threshold},
                        {"record_decisions", p.record_decisions}};
  if (c.policy == PolicyKind::FreqTier || c.policy == PolicyKind::ExactLfu) {
    if (c.policy == PolicyKind::FreqTier) {
      const SketchConfig s = resolved_sketch(c);
      j["sketch"] = {{"num_counters", s.num_counters},
                     {"counter_bits", s.counter_bits},
                     {"num_hashes", s.num_hashes},
                     {"layout", to_string(s.layout)},
                     {"hash_seed", s.hash_seed},
                     {"fp_rate", c.sketch.fp_rate},
                     {"n_items", c.sketch.n_items.value_or(c.local_pages)}};
    } else {
      j["sketch"] = {{"counter_bits", c.sketch.counter_bits}};
    }
  }
  if (c.policy == PolicyKind::Recency) {
    const RecencyConfig r = c.recency.resolved(n_pages, c.local_pages, p.window_accesses);
    j["recency"] = {{"scan_window_pages", r.scan_window_pages},
                    {"scan_period_accesses", r.scan_period_accesses},
                    {"hot_latency_ticks", r.hot_latency_ticks},
                    {"lru_demote_batch", r.lru_demote_batch},
                    {"require_active", r.require_active}};
  }
  j["latency"] = {{"preset", c.latency_preset},
                  {"local_latency_ns", c.latency.local_latency_ns},
                  {"cxl_extra_ns", c.latency.cxl_extra_ns},
                  {"cxl_bandwidth_fraction", c.latency.cxl_bandwidth_fraction},
                  {"page_copy_ns", c.latency.page_copy_ns}};
  return j;
}

namespace detail {

inline SimReport start_report(std::uint64_t n_pages, std::span<const PageId> pages,
                              const SimConfig& config) {
  if (config.local_pages < 1) throw std::invalid_argument("local_pages must be at least 1");
  config.latency.validate();
  SimReport r;
  r.policy = std::string(to_string(config.policy));
  r.trace_digest = trace_digest(n_pages, pages);
  r.n_pages = n_pages;
  r.n_accesses = pages.size();
  r.local_pages = config.local_pages;
  r.config_echo = config_echo(config, n_pages);
  return r;
}

/// Window bookkeeping for policies that have no sampling state machine.
class PlainWindows {
 public:
  explicit PlainWindows(std::uint64_t window_accesses) : window_(window_accesses) {}

  template <typename Counts>
  void after_access(const TierState& s, Counts&& migrations) {
    if (++seen_ == window_) close(s, migrations());
  }

  void close(const TierState& s, std::pair<std::uint64_t, std::uint64_t> migrations) {
    if (seen_ == 0) return;
    WindowRecord w;
    w.index = windows.size();
    w.accesses = s.local_accesses() + s.cxl_accesses() - start_total_;
    w.local_accesses = s.local_accesses() - start_local_;
    w.hit_ratio = static_cast<double>(w.local_accesses) / static_cast<double>(w.accesses);
    w.promotions = migrations.first;
    w.demotions = migrations.second;
    windows.push_back(w);
    seen_ = 0;
    start_local_ = s.local_accesses();
    start_total_ = s.local_accesses() + s.cxl_accesses();
  }

  std::vector<WindowRecord> windows;

 private:
  std::uint64_t window_;
  std::uint64_t seen_ = 0;
  std::uint64_t start_local_ = 0;
  std::uint64_t start_total_ = 0;
};

template <typename Tracker>
SimReport run_engine(std::uint64_t n_pages, std::span<const PageId> pages,
                     const SimConfig& config, Tracker tracker, TierState* external_state) {
  SimReport report = start_report(n_pages, pages, config);
  TierState local_state(n_pages, config.local_pages);
  TierState& state = external_state ? *external_state : local_state;
  PolicyEngine<Tracker> engine(config.policy_config, std::move(tracker),
                               resolved_watermarks(config), n_pages, config.local_pages,
                               config.seed);
  for (const PageId p : pages) {
    state.access(p);
    engine.on_access(state, p);
  }
  engine.finish(state);
  record_totals(report, state, config.latency);
  report.windows = engine.windows();
  report.transitions = engine.transitions();
  report.decisions = engine.decisions();
  report.counters = engine.counters();
  report.final_hot_threshold = engine.hot_threshold();
  if constexpr (std::is_same_v<Tracker, CountingBloomFilter>) {
    report.sketch = make_sketch_stats(engine.tracker().memory_bytes(), engine.tracker().max_count(),
                                      engine.tracker().histogram(), engine.observed_histogram());
  } else {
    report.sketch = make_sketch_stats(engine.tracker().memory_bytes(), engine.tracker().max_count(),
                                      {}, engine.observed_histogram());
    report.metadata_bytes = kPerPageMetadataBytes * n_pages;
  }
  return report;
}

}  // namespace detail

inline SimReport run_freqtier(std::uint64_t n_pages, std::span<const PageId> pages,
                              const SimConfig& config, TierState* state = nullptr) {
  return detail::run_engine(n_pages, pages, config, CountingBloomFilter(resolved_sketch(config)),
                            state);
}

/// Same engine with the sketch replaced by an exact per-page table.
inline SimReport run_exact_lfu(std::uint64_t n_pages, std::span<const PageId> pages,
                               const SimConfig& config, TierState* state = nullptr) {
  return detail::run_engine(n_pages, pages, config,
                            ExactCounterTable(n_pages, config.sketch.counter_bits), state);
}

/// Static placement of the most frequently accessed pages; never migrates.
inline SimReport run_ideal(std::uint64_t n_pages, std::span<const PageId> pages,
                           const SimConfig& config) {
  SimReport report = detail::start_report(n_pages, pages, config);
  TierState state(n_pages, config.local_pages);
  for (const PageId p : ideal_resident_set(pages, n_pages, config.local_pages))
    state.place(p, Tier::Local);
  for (const PageId p : pages)
    if (state.residency(p) == Tier::Unallocated) state.place(p, Tier::Cxl);
  detail::PlainWindows windows(config.policy_config.window_accesses);
  const auto none = [] { return std::pair<std::uint64_t, std::uint64_t>{0, 0}; };
  for (const PageId p : pages) {
    state.access(p);
    windows.after_access(state, none);
  }
  windows.close(state, none());
  record_totals(report, state, config.latency);
  report.windows = std::move(windows.windows);
  return report;
}

inline SimReport run_recency(std::uint64_t n_pages, std::span<const PageId> pages,
                             const SimConfig& config, TierState* external_state = nullptr,
                             std::vector<PromotionEvent>* events = nullptr) {
  SimReport report = detail::start_report(n_pages, pages, config);
  TierState local_state(n_pages, config.local_pages);
  TierState& state = external_state ? *external_state : local_state;
  const RecencyConfig rc =
      config.recency.resolved(n_pages, config.local_pages, config.policy_config.window_accesses);
  RecencyEngine engine(rc, resolved_watermarks(config), n_pages);
  detail::PlainWindows windows(config.policy_config.window_accesses);
  const auto migrations = [&] {
    std::pair<std::uint64_t, std::uint64_t> m{engine.window_promotions(), engine.window_demotions()};
    engine.reset_window();
    return m;
  };
  for (const PageId p : pages) {
    state.access(p);
    engine.on_access(state, p);
    windows.after_access(state, migrations);
  }
  windows.close(state, migrations());
  record_totals(report, state, config.latency);
  report.windows = std::move(windows.windows);
  if (events) *events = engine.promotions();
  return report;
}

inline SimReport simulate(std::uint64_t n_pages, std::span<const PageId> pages,
                          const SimConfig& config) {
  switch (config.policy) {
    case PolicyKind::FreqTier: return run_freqtier(n_pages, pages, config);
    case PolicyKind::ExactLfu: return run_exact_lfu(n_pages, pages, config);
    case PolicyKind::Recency: return run_recency(n_pages, pages, config);
    case PolicyKind::Ideal: return run_ideal(n_pages, pages, config);
  }
  throw std::logic_error("unhandled policy");
}

inline SimReport simulate(const Trace& trace, const SimConfig& config) {
  return simulate(trace.n_pages, trace.pages, config);
}

}  // namespace freqtier
