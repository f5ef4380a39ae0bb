#include <gtest/gtest.h>

#include <vector>

#include "freqtier/baselines.hpp"
#include "freqtier/policy.hpp"
#include "freqtier/simulate.hpp"
#include "freqtier/trace.hpp"

using namespace freqtier;

namespace {

using Engine = PolicyEngine<ExactCounterTable>;

PolicyConfig every_access(std::uint64_t batch) {
  PolicyConfig c;
  c.sampling_probs = {1.0};
  c.batch_size = batch;
  c.adaptive_threshold = false;
  c.record_decisions = true;
  return c;
}

Engine make(PolicyConfig c, std::uint64_t n, std::uint64_t cap, Watermarks w = {0, 1}) {
  return Engine(std::move(c), ExactCounterTable(n), w, n, cap, 1);
}

void feed(Engine& e, TierState& s, PageId p, int times = 1) {
  for (int i = 0; i < times; ++i) {
    s.access(p);
    e.on_access(s, p);
  }
}

void run_window(Engine& e, TierState& s, int local, int total) {
  for (int i = 0; i < total; ++i) s.access(i < local ? 0 : 1);
  e.window_tick(s);
}

}  // namespace

TEST(Batching, FiresOnBatchSize) {
  TierState s(10, 10);
  auto e = make(every_access(3), 10, 10);
  feed(e, s, 1);
  feed(e, s, 2);
  EXPECT_EQ(e.batch().size(), 2u);
  EXPECT_EQ(e.counters().batches, 0u);
  feed(e, s, 1);
  EXPECT_EQ(e.counters().batches, 1u);
  EXPECT_TRUE(e.batch().empty());
  EXPECT_EQ(e.tracker().get(1), 2u);
  EXPECT_EQ(e.counters().tracker_updates, 2u);
  EXPECT_EQ(e.counters().uncoalesced_updates, 3u);
}

TEST(Batching, MonitoringStopsSampling) {
  auto c = every_access(1000);
  c.window_accesses = 10;
  c.stable_windows = 1;
  TierState s(4, 4);
  auto e = make(c, 4, 4);
  feed(e, s, 0, 10);
  ASSERT_EQ(e.machine_state(), MachineState::Monitoring);
  const auto size = e.batch().size();
  const auto samples = e.counters().samples;
  feed(e, s, 1, 5);
  EXPECT_EQ(e.batch().size(), size);
  EXPECT_EQ(e.counters().samples, samples);
}

TEST(Batching, SamplingRate) {
  PolicyConfig c;
  c.sampling_probs = {0.1};
  c.batch_size = 1u << 30;
  c.window_accesses = 1u << 30;
  TierState s(8, 8);
  auto e = make(c, 8, 8);
  for (int i = 0; i < 1'000'000; ++i) feed(e, s, i % 8);
  EXPECT_NEAR(e.counters().samples / 1e6, 0.1, 0.002);
}

TEST(Promotion, CrossesAtThreshold) {
  TierState s(4, 2);
  s.place(3, Tier::Cxl);
  auto e = make(every_access(1), 4, 2);
  feed(e, s, 3, 4);
  EXPECT_EQ(s.residency(3), Tier::Cxl);
  feed(e, s, 3);
  EXPECT_EQ(s.residency(3), Tier::Local);
  ASSERT_EQ(e.decisions().size(), 1u);
  EXPECT_EQ(e.decisions()[0].tick, 5u);
  EXPECT_EQ(e.decisions()[0].frequency, 5u);
  EXPECT_EQ(e.decisions()[0].kind, Decision::Kind::Promote);
}

TEST(Promotion, LocalPageIsOnlyMarkedHot) {
  TierState s(4, 2);
  auto e = make(every_access(1), 4, 2);
  feed(e, s, 0, 6);
  EXPECT_TRUE(e.in_hot_set(0));
  EXPECT_TRUE(e.decisions().empty());
  EXPECT_EQ(s.promoted_pages(), 0u);
  EXPECT_EQ(s.migration_bytes(), 0u);
}

TEST(Demotion, ScansInAddressOrder) {
  TierState s(4, 4);
  for (PageId p = 0; p < 4; ++p) s.place(p, Tier::Local);
  auto e = make(every_access(1), 4, 4, Watermarks{1, 2});
  const std::uint32_t freqs[] = {6, 2, 7, 1};
  for (PageId p = 0; p < 4; ++p) e.tracker().increase_by(p, freqs[p]);
  const auto r = e.demotion_scan(s);
  EXPECT_EQ(r.scanned, 4u);
  EXPECT_EQ(r.demoted, 2u);
  EXPECT_FALSE(r.empty_lap);
  EXPECT_EQ(s.residency(1), Tier::Cxl);
  EXPECT_EQ(s.residency(3), Tier::Cxl);
  EXPECT_EQ(s.residency(0), Tier::Local);
  EXPECT_EQ(s.residency(2), Tier::Local);
  EXPECT_EQ(e.demotion_checkpoint(), 0u);
}

TEST(Demotion, HandTracedFourPages) {
  TierState s(4, 2);
  s.place(0, Tier::Local);
  s.place(1, Tier::Local);
  auto e = make(every_access(1), 4, 2, Watermarks{0, 1});
  e.tracker().increase_by(0, 7);
  e.tracker().increase_by(1, 2);
  const auto r = e.demotion_scan(s);
  EXPECT_EQ(r.demoted, 1u);
  EXPECT_EQ(s.residency(1), Tier::Cxl);
  EXPECT_EQ(s.residency(0), Tier::Local);
  ASSERT_EQ(e.decisions().size(), 1u);
  EXPECT_EQ(e.decisions()[0].kind, Decision::Kind::Demote);
  EXPECT_EQ(e.decisions()[0].frequency, 2u);
}

TEST(Demotion, ResumesFromCheckpoint) {
  TierState s(8, 8);
  for (PageId p = 0; p < 8; ++p) s.place(p, Tier::Local);
  auto e = make(every_access(1), 8, 8, Watermarks{1, 2});
  const auto expect_round = [&](std::vector<PageId> want, PageId next) {
    const auto r = e.demotion_scan(s);
    EXPECT_EQ(r.demoted, 3u);
    for (PageId p : want) EXPECT_EQ(s.residency(p), Tier::Cxl) << p;
    EXPECT_EQ(e.demotion_checkpoint(), next);
    s.promote(want);
  };
  expect_round({0, 1, 2}, 3);
  expect_round({3, 4, 5}, 6);
  expect_round({6, 7, 0}, 1);
}

TEST(Demotion, StopsAtWatermark) {
  TierState s(8, 8);
  for (PageId p = 0; p < 5; ++p) s.place(p, Tier::Local);
  auto e = make(every_access(1), 8, 8, Watermarks{1, 2});
  const auto r = e.demotion_scan(s);
  EXPECT_EQ(r.scanned, 0u);
  EXPECT_EQ(r.demoted, 0u);
}

namespace {

// Four hot local pages, one hot page waiting on the slow tier, no free room.
struct Crowded {
  TierState s{6, 4};
  Engine e;
  explicit Crowded(bool adaptive)
      : e([&] {
          auto c = every_access(1000);
          c.adaptive_threshold = adaptive;
          return make(c, 6, 4, Watermarks{1, 2});
        }()) {
    for (PageId p = 0; p < 4; ++p) {
      s.place(p, Tier::Local);
      e.tracker().increase_by(p, 9);
    }
    s.place(4, Tier::Cxl);
    for (int i = 0; i < 5; ++i) e.add_sample(4);
  }
};

}  // namespace

TEST(Demotion, EmptyLapEntersMonitoring) {
  Crowded c(false);
  const auto sum = c.e.process_batch(c.s);
  EXPECT_EQ(sum.candidates, 1u);
  EXPECT_EQ(sum.promoted, 0u);
  EXPECT_EQ(c.e.machine_state(), MachineState::Monitoring);
  ASSERT_EQ(c.e.transitions().size(), 3u);
  EXPECT_EQ(c.e.transitions()[0].to, MachineState::Demoting);
  EXPECT_EQ(c.e.transitions()[1].to, MachineState::Promoting);
  EXPECT_EQ(c.e.transitions()[2].to, MachineState::Monitoring);
}

TEST(Demotion, EmptyLapWithDemandRaisesThreshold) {
  Crowded c(true);
  c.e.process_batch(c.s);
  EXPECT_EQ(c.e.machine_state(), MachineState::Promoting);
  // raised by the reclaim before and again by the one after promotion
  EXPECT_EQ(c.e.hot_threshold(), 7u);
  EXPECT_FALSE(c.e.in_hot_set(4));
}

namespace {

// Engine over 1000 pages with capacity 100; 200 pages are local and the rest
// free, so no batch triggers reclaim.
struct HotSetRig {
  TierState s{1000, 1000};
  Engine e;
  HotSetRig(std::uint32_t init, std::uint64_t aging)
      : e([&] {
          PolicyConfig c;
          c.sampling_probs = {1.0};
          c.batch_size = 1u << 30;
          c.hot_threshold_init = init;
          c.aging_interval_batches = aging;
          return Engine(c, ExactCounterTable(1000), Watermarks{1, 3}, 1000, 100, 1);
        }()) {
    for (PageId p = 0; p < 200; ++p) s.place(p, Tier::Local);
  }
  BatchSummary batch_of(int pages, int hits) {
    for (int p = 0; p < pages; ++p)
      for (int i = 0; i < hits; ++i) e.add_sample(p);
    return e.process_batch(s);
  }
};

}  // namespace

TEST(Threshold, RisesWhenHotSetTooLarge) {
  HotSetRig r(2, 10);
  EXPECT_EQ(r.batch_of(150, 3).hot_threshold, 3u);
  EXPECT_EQ(r.e.hot_set_size(), 150u);
}

TEST(Threshold, RefilterDropsColderPages) {
  HotSetRig r(2, 10);
  for (int p = 0; p < 150; ++p) r.e.add_sample(p);
  for (int p = 0; p < 150; ++p) r.e.add_sample(p);
  for (int p = 0; p < 30; ++p) r.e.add_sample(p);
  EXPECT_EQ(r.e.process_batch(r.s).hot_threshold, 3u);
  EXPECT_EQ(r.e.hot_set_size(), 30u);
}

TEST(Threshold, HoldsInsideTolerance) {
  HotSetRig r(2, 1);
  EXPECT_EQ(r.batch_of(95, 3).hot_threshold, 2u);
}

TEST(Threshold, LowersOnlyAtAging) {
  HotSetRig waiting(2, 10);
  EXPECT_EQ(waiting.batch_of(50, 3).hot_threshold, 2u);
  HotSetRig due(2, 1);
  const auto sum = due.batch_of(50, 3);
  EXPECT_EQ(sum.hot_threshold, 1u);
  EXPECT_TRUE(sum.aged);
  EXPECT_EQ(due.e.hot_set_size(), 0u);
  EXPECT_EQ(due.e.tracker().get(0), 1u);
}

TEST(Threshold, FloorAtOne) {
  HotSetRig r(1, 1);
  EXPECT_EQ(r.batch_of(50, 3).hot_threshold, 1u);
  EXPECT_EQ(r.batch_of(10, 3).hot_threshold, 1u);
}

TEST(Threshold, DirectArithmetic) {
  HotSetRig r(4, 1000);
  r.batch_of(150, 15);
  r.e.set_hot_threshold(15);
  EXPECT_EQ(r.e.update_hot_threshold(), 15u);  // capped at max count
  r.e.set_hot_threshold(4);
  EXPECT_EQ(r.e.update_hot_threshold(), 5u);
}

TEST(Windows, StabilityStepsDownThenMonitors) {
  PolicyConfig c;
  c.window_accesses = 1u << 30;
  TierState s(2, 1);
  auto e = make(c, 2, 2);
  run_window(e, s, 900, 1000);
  run_window(e, s, 902, 1000);
  EXPECT_EQ(e.sampling_level(), 0u);
  run_window(e, s, 901, 1000);
  EXPECT_EQ(e.sampling_level(), 1u);
  EXPECT_DOUBLE_EQ(e.sampling_probability(), 1e-4);
  run_window(e, s, 900, 1000);
  EXPECT_EQ(e.sampling_level(), 2u);
  run_window(e, s, 900, 1000);
  EXPECT_EQ(e.machine_state(), MachineState::Monitoring);
  run_window(e, s, 700, 1000);
  EXPECT_EQ(e.machine_state(), MachineState::Promoting);
  EXPECT_EQ(e.sampling_level(), 0u);
  EXPECT_EQ(e.windows().size(), 6u);
  EXPECT_NEAR(e.windows()[1].hit_ratio, 0.902, 1e-12);
}

TEST(Windows, InstabilityRaisesIntensity) {
  PolicyConfig c;
  c.window_accesses = 1u << 30;
  TierState s(2, 1);
  auto e = make(c, 2, 2);
  for (int i = 0; i < 3; ++i) run_window(e, s, 900, 1000);
  ASSERT_EQ(e.sampling_level(), 1u);
  run_window(e, s, 800, 1000);
  EXPECT_EQ(e.sampling_level(), 0u);
}

TEST(Windows, PlateauBeforeStability) {
  auto c = every_access(1);
  c.window_accesses = 100;
  TierState s(4, 4);
  auto e = make(c, 4, 4);
  feed(e, s, 0, 100);
  EXPECT_EQ(e.machine_state(), MachineState::Monitoring);
  ASSERT_EQ(e.transitions().size(), 1u);
  EXPECT_EQ(e.transitions()[0].reason, "promotion plateau");
}

TEST(Windows, FinishRecordsPartial) {
  PolicyConfig c;
  c.window_accesses = 100;
  TierState s(4, 4);
  auto e = make(c, 4, 4);
  feed(e, s, 0, 250);
  e.finish(s);
  ASSERT_EQ(e.windows().size(), 3u);
  EXPECT_EQ(e.windows()[2].accesses, 50u);
}

TEST(StateMachine, AllowedEdges) {
  using S = MachineState;
  const S all[] = {S::Promoting, S::Demoting, S::Monitoring};
  int allowed = 0;
  for (S a : all)
    for (S b : all) allowed += is_allowed_transition(a, b);
  EXPECT_EQ(allowed, 4);
  EXPECT_FALSE(is_allowed_transition(S::Demoting, S::Monitoring));
  EXPECT_FALSE(is_allowed_transition(S::Monitoring, S::Demoting));
}

namespace {

SimReport shifted_run(std::uint64_t seed) {
  TraceSpec spec;
  spec.distribution = PhaseShift{Zipf{1.0}, 400'000};
  spec.n_pages = 20'000;
  spec.n_accesses = 800'000;
  spec.seed = seed;
  SimConfig c;
  c.local_pages = 1000;
  c.policy_config.sampling_probs = {1.0, 0.3, 0.1};
  c.policy_config.batch_size = 5000;
  c.policy_config.window_accesses = 20'000;
  c.policy_config.record_decisions = true;
  return simulate(generate(spec), c);
}

}  // namespace

TEST(StateMachine, RunsTakeOnlyAllowedEdges) {
  const auto r = shifted_run(3);
  ASSERT_FALSE(r.transitions.empty());
  MachineState cur = MachineState::Promoting;
  std::uint64_t last = 0;
  for (const auto& t : r.transitions) {
    EXPECT_EQ(t.from, cur);
    EXPECT_TRUE(is_allowed_transition(t.from, t.to));
    EXPECT_GE(t.tick, last);
    cur = t.to;
    last = t.tick;
  }
  // one level per window, except the reset when monitoring ends
  for (std::size_t i = 1; i < r.windows.size(); ++i) {
    const auto& a = r.windows[i - 1];
    const auto& b = r.windows[i];
    if (a.machine_state == MachineState::Monitoring) continue;
    EXPECT_LE(std::max(a.sampling_level, b.sampling_level) - std::min(a.sampling_level, b.sampling_level), 1u);
  }
}

TEST(Decisions, RespectThreshold) {
  const auto r = shifted_run(3);
  ASSERT_FALSE(r.decisions.empty());
  std::uint64_t last = 0;
  for (const auto& d : r.decisions) {
    if (d.kind == Decision::Kind::Promote)
      EXPECT_GE(d.frequency, d.threshold);
    else
      EXPECT_LT(d.frequency, d.threshold);
    EXPECT_GE(d.tick, last);
    last = d.tick;
  }
  EXPECT_GT(r.promoted_pages, 0u);
  EXPECT_LE(r.counters.tracker_updates, r.counters.uncoalesced_updates);
}

TEST(Decisions, Deterministic) {
  const auto a = shifted_run(5);
  const auto b = shifted_run(5);
  EXPECT_EQ(a.decisions, b.decisions);
  EXPECT_EQ(a.cumulative_hit_ratio, b.cumulative_hit_ratio);
  EXPECT_EQ(a.window_hit_ratios(), b.window_hit_ratios());
}

TEST(Config, Validation) {
  PolicyConfig c;
  c.sampling_probs = {0.1, 0.2};
  EXPECT_THROW(c.validate(15), std::invalid_argument);
  c = PolicyConfig{};
  c.hot_threshold_init = 16;
  EXPECT_THROW(c.validate(15), std::invalid_argument);
  c = PolicyConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(15), std::invalid_argument);
  PolicyConfig::desk_scale().validate(15);
}
