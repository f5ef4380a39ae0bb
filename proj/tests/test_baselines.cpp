#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "freqtier/baselines.hpp"
#include "freqtier/simulate.hpp"
#include "freqtier/trace.hpp"

using namespace freqtier;

TEST(OfflineIdeal, EverythingFits) {
  const std::vector<PageId> t{0, 1, 2, 1, 0};
  EXPECT_DOUBLE_EQ(offline_ideal(t, 3, 3), 1.0);
}

TEST(OfflineIdeal, TopPage) {
  std::vector<PageId> t(9, 0);
  t.push_back(1);
  EXPECT_DOUBLE_EQ(offline_ideal(t, 2, 1), 0.9);
}

TEST(OfflineIdeal, UniformHalf) {
  TraceSpec spec;
  spec.distribution = Uniform{};
  spec.n_pages = 1000;
  spec.n_accesses = 20'000'000;
  spec.seed = 4;
  const Trace tr = generate(spec);
  EXPECT_NEAR(offline_ideal(tr.pages, tr.n_pages, 500), 0.5, 0.01);
}

TEST(OfflineIdeal, BruteForceOracle) {
  Rng rng(17);
  for (int round = 0; round < 30; ++round) {
    std::vector<PageId> t;
    for (int i = 0; i < 200; ++i) t.push_back(uniform_below(rng, 12));
    const std::uint64_t cap = 1 + uniform_below(rng, 6);
    double best = 0;
    for (unsigned mask = 0; mask < (1u << 12); ++mask) {
      if (static_cast<std::uint64_t>(__builtin_popcount(mask)) > cap) continue;
      int hits = 0;
      for (auto p : t) hits += (mask >> p) & 1;
      best = std::max(best, hits / 200.0);
    }
    EXPECT_DOUBLE_EQ(offline_ideal(t, 12, cap), best);
  }
}

TEST(OfflineIdeal, TiesToLowerId) {
  const std::vector<PageId> t{3, 1, 2};
  EXPECT_EQ(ideal_resident_set(t, 4, 2), (std::vector<PageId>{1, 2}));
}

TEST(ExactCounter, SaturatesAndAges) {
  ExactCounterTable t(4);
  for (int i = 0; i < 20; ++i) t.increment(1);
  EXPECT_EQ(t.get(1), 15u);
  t.increase_by(2, 5);
  t.age();
  EXPECT_EQ(t.get(1), 7u);
  EXPECT_EQ(t.get(2), 2u);
  EXPECT_THROW(t.increase_by(0, 0), std::invalid_argument);
}

TEST(ExactLfu, MetadataModel) {
  EXPECT_EQ(kPerPageMetadataBytes * 1'000'000, 168'000'000u);
  SimConfig c;
  c.policy = PolicyKind::ExactLfu;
  c.local_pages = 2;
  const std::vector<PageId> t{0, 1, 2};
  const auto r = simulate(1'000'000, t, c);
  ASSERT_TRUE(r.metadata_bytes.has_value());
  EXPECT_EQ(*r.metadata_bytes, 168'000'000u);
}

TEST(ExactLfu, HandTracedPromotions) {
  // sampling 1.0, batch 1: a Cxl page becomes a candidate on the access that
  // brings it to the threshold. One local page and no watermark room, so
  // none of them move.
  SimConfig c;
  c.local_pages = 1;
  c.policy_config.sampling_probs = {1.0};
  c.policy_config.batch_size = 1;
  c.policy_config.hot_threshold_init = 3;
  c.policy_config.adaptive_threshold = false;
  c.policy_config.record_decisions = true;
  c.policy_config.window_accesses = 1000;
  const std::vector<PageId> t{0, 1, 1, 2, 1, 2, 2};
  const auto r = run_exact_lfu(3, t, c);
  std::vector<std::pair<std::uint64_t, PageId>> promos;
  for (const auto& d : r.decisions)
    if (d.kind == Decision::Kind::Promote) promos.emplace_back(d.tick, d.page);
  // page 1 reaches 3 at tick 5, page 2 at tick 7
  EXPECT_EQ(promos, (std::vector<std::pair<std::uint64_t, PageId>>{{5, 1}, {7, 2}}));
  EXPECT_EQ(r.promoted_pages, 0u);
}

TEST(ExactLfu, MatchesCollisionFreeSketch) {
  TraceSpec spec;
  spec.distribution = Zipf{1.0};
  spec.n_pages = 2000;
  spec.n_accesses = 200'000;
  spec.seed = 12;
  const Trace tr = generate(spec);
  SimConfig c;
  c.local_pages = 200;
  c.policy_config.sampling_probs = {1.0};
  c.policy_config.batch_size = 1000;
  c.policy_config.window_accesses = 20'000;
  c.policy_config.record_decisions = true;
  c.sketch.num_counters = 1u << 24;
  c.sketch.num_hashes = 1;
  // With one hash over 2^24 counters, at most a handful of the 2000 pages
  // share a counter; pin a seed where none do.
  for (std::uint64_t seed = 1;; ++seed) {
    c.sketch.hash_seed = seed;
    CountingBloomFilter f(resolved_sketch(c));
    std::vector<std::uint64_t> slots;
    for (PageId p = 0; p < spec.n_pages; ++p) slots.push_back(f.counter_indices(p)[0]);
    std::sort(slots.begin(), slots.end());
    if (std::adjacent_find(slots.begin(), slots.end()) == slots.end()) break;
  }
  const auto cbf = run_freqtier(tr.n_pages, tr.pages, c);
  const auto exact = run_exact_lfu(tr.n_pages, tr.pages, c);
  EXPECT_FALSE(cbf.decisions.empty());
  EXPECT_EQ(cbf.decisions, exact.decisions);
  EXPECT_EQ(cbf.cumulative_hit_ratio, exact.cumulative_hit_ratio);
}

namespace {

RecencyConfig crafted_recency() {
  RecencyConfig r;
  r.scan_window_pages = 8;
  r.scan_period_accesses = 20;
  r.hot_latency_ticks = 4;
  r.lru_demote_batch = 1;
  return r;
}

}  // namespace

TEST(Recency, OnlyFirstFaultCounts) {
  TierState s(8, 4);
  for (PageId p = 0; p < 4; ++p) s.place(p, Tier::Local);
  s.place(5, Tier::Cxl);
  RecencyEngine e(crafted_recency(), Watermarks{0, 1}, 8);
  for (int i = 0; i < 20; ++i) {
    s.access(0);
    e.on_access(s, 0);
  }
  for (int i = 0; i < 10; ++i) {
    s.access(5);
    e.on_access(s, 5);
  }
  ASSERT_EQ(e.promotions().size(), 1u);
  EXPECT_EQ(e.promotions()[0].page, 5u);
  EXPECT_EQ(e.promotions()[0].tick, 21u);
}

TEST(Recency, ColdPageMisclassified) {
  TierState s(8, 4);
  for (PageId p = 0; p < 3; ++p) s.place(p, Tier::Local);
  s.place(4, Tier::Cxl);
  RecencyEngine e(crafted_recency(), Watermarks{0, 1}, 8);
  for (int i = 0; i < 20; ++i) {
    s.access(0);
    e.on_access(s, 0);
  }
  s.access(4);  // one access, right after the unmap
  e.on_access(s, 4);
  ASSERT_EQ(e.promotions().size(), 1u);
  EXPECT_EQ(e.promotions()[0].page, 4u);
  EXPECT_EQ(s.residency(4), Tier::Local);
}

TEST(Recency, HotPageOutsideWindowMissed) {
  TierState s(8, 4);
  for (PageId p = 0; p < 3; ++p) s.place(p, Tier::Local);
  s.place(5, Tier::Cxl);
  RecencyEngine e(crafted_recency(), Watermarks{0, 1}, 8);
  for (int i = 0; i < 25; ++i) {
    s.access(0);
    e.on_access(s, 0);
  }
  for (int i = 0; i < 10; ++i) {  // first fault at tick 26, latency 6
    s.access(5);
    e.on_access(s, 5);
  }
  EXPECT_TRUE(e.promotions().empty());
  EXPECT_EQ(s.residency(5), Tier::Cxl);
}

TEST(Recency, LruDemotesLeastRecent) {
  TierState s(8, 3);
  RecencyConfig rc = crafted_recency();
  RecencyEngine e(rc, Watermarks{0, 0}, 8);
  for (PageId p : {0, 1, 2}) {
    s.access(p);
    e.on_access(s, p);
  }
  s.access(0);
  e.on_access(s, 0);
  EXPECT_EQ(e.lru_order(), (std::vector<PageId>{1, 2, 0}));
  s.place(6, Tier::Cxl);
  for (int i = 0; i < 16; ++i) {
    s.access(2);
    e.on_access(s, 2);
  }
  // scan at tick 20 unmaps page 6 (ticks 5..20 go to page 2); the fault promotes it after demoting page 1
  s.access(6);
  e.on_access(s, 6);
  EXPECT_EQ(s.residency(6), Tier::Local);
  EXPECT_EQ(s.residency(1), Tier::Cxl);
  EXPECT_EQ(e.lru_order().back(), 6u);
}

TEST(Recency, Resolution) {
  RecencyConfig r;
  const auto x = r.resolved(1000, 100, 5000);
  EXPECT_EQ(x.scan_window_pages, 1000u);
  EXPECT_EQ(x.scan_period_accesses, 5000u);
  EXPECT_EQ(x.hot_latency_ticks, 5000u);
  EXPECT_EQ(x.lru_demote_batch, 2u);
  EXPECT_EQ(RecencyConfig::desk_scale(6000).hot_latency_ticks, 100u);
}

TEST(Ideal, NoMigrations) {
  TraceSpec spec;
  spec.distribution = Zipf{1.0};
  spec.n_pages = 1000;
  spec.n_accesses = 50'000;
  spec.seed = 3;
  const Trace tr = generate(spec);
  SimConfig c;
  c.policy = PolicyKind::Ideal;
  c.local_pages = 100;
  const auto r = simulate(tr, c);
  EXPECT_EQ(r.traffic.migration_bytes, 0u);
  EXPECT_DOUBLE_EQ(r.cumulative_hit_ratio, offline_ideal(tr.pages, tr.n_pages, 100));
}
