#include <gtest/gtest.h>

#include <cmath>

#include "athena/policies.h"

using namespace athena;

namespace {

class FixedOcp : public OffChipPredictor {
 public:
  explicit FixedOcp(bool offchip) : offchip_(offchip) {}
  bool predict(uint64_t, uint64_t) const override { return offchip_; }
  void train(uint64_t, uint64_t, bool) override {}
  std::string name() const override { return "fixed"; }

 private:
  bool offchip_;
};

EpochTelemetry some_epoch(uint64_t cycles) {
  EpochTelemetry e;
  e.cycles = cycles;
  e.retired_instructions = 2000;
  e.prefetches_issued = 40;
  e.prefetch_demand_hits = 3;
  return e;
}

}  // namespace

TEST(Naive, AlwaysEverythingAtMaxDegree) {
  NaiveCoordinator naive(1, 4);
  EXPECT_EQ(naive.initial_action(), (CoordinationAction{3, 4}));
  for (uint64_t c : {500, 5000, 50000}) EXPECT_EQ(naive.epoch_tick(some_epoch(c)), (CoordinationAction{3, 4}));

  NaiveCoordinator two(2, 4);
  EXPECT_EQ(two.actions(), 8u);
  EXPECT_EQ(two.epoch_tick(some_epoch(900)), (CoordinationAction{7, 4}));
}

TEST(Static, FixedAction) {
  StaticCoordinator off(1, 4, 1);
  EXPECT_EQ(off.name(), "static-1");
  EXPECT_EQ(off.initial_action(), (CoordinationAction{1, 0}));
  StaticCoordinator pf(1, 4, 2);
  EXPECT_EQ(pf.epoch_tick(some_epoch(700)), (CoordinationAction{2, 4}));
  EXPECT_THROW(StaticCoordinator(1, 4, 4), std::invalid_argument);
}

TEST(Mab, UnpulledArmsFirst) {
  MabState m(4);
  EXPECT_EQ(mab_select(m), 0u);
  mab_update(m, 0, 5.0);
  EXPECT_EQ(mab_select(m), 1u);
  mab_update(m, 1, -1.0);
  EXPECT_EQ(mab_select(m), 2u);
}

TEST(Mab, EqualStatisticsPickArmZero) {
  MabState m(4);
  for (uint32_t a = 0; a < 4; ++a) {
    m.reward_sum[a] = 1.0;
    m.count[a] = 2.0;
  }
  EXPECT_EQ(mab_select(m), 0u);
}

TEST(Mab, DiscountedUpdate) {
  MabState m(2, 0.5, 2.0);
  mab_update(m, 0, 4.0);
  mab_update(m, 1, 2.0);
  mab_update(m, 0, 1.0);
  EXPECT_DOUBLE_EQ(m.reward_sum[0], 4.0 * 0.25 + 1.0);
  EXPECT_DOUBLE_EQ(m.count[0], 0.25 + 1.0);
  EXPECT_DOUBLE_EQ(m.reward_sum[1], 1.0);
  EXPECT_DOUBLE_EQ(m.count[1], 0.5);
}

TEST(Mab, UndiscountedIsUcb1) {
  MabState m(3, 1.0, 2.0);
  const double rewards[] = {0.2, 0.5, 0.1};
  std::vector<double> sum(3, 0.0), n(3, 0.0);
  for (int t = 0; t < 300; ++t) {
    // UCB1 reference.
    uint32_t expect = 0;
    bool unpulled = false;
    for (uint32_t a = 0; a < 3 && !unpulled; ++a)
      if (n[a] == 0) {
        expect = a;
        unpulled = true;
      }
    if (!unpulled) {
      const double total = n[0] + n[1] + n[2];
      double best = -1e300;
      for (uint32_t a = 0; a < 3; ++a) {
        const double score = sum[a] / n[a] + std::sqrt(2.0 * std::log(total) / n[a]);
        if (score > best) {
          best = score;
          expect = a;
        }
      }
    }
    const uint32_t arm = mab_select(m);
    ASSERT_EQ(arm, expect) << "round " << t;
    mab_update(m, arm, rewards[arm]);
    sum[arm] += rewards[arm];
    n[arm] += 1;
  }
}

TEST(Mab, BetterArmDominates) {
  for (double discount : {1.0, 0.99}) {
    MabState m(2, discount, 2.0);
    int good = 0;
    for (int t = 0; t < 1000; ++t) {
      const uint32_t arm = mab_select(m);
      mab_update(m, arm, arm == 1 ? 1.0 : 0.0);
      if (t >= 500) good += arm == 1;
    }
    EXPECT_GE(good, 450) << "discount " << discount;
  }
}

TEST(Mab, CoordinatorRewardsIpcChange) {
  MabCoordinator mab(1, 4, 0.99, 2.0);
  EXPECT_EQ(mab.initial_action().index, 0u);
  mab.epoch_tick(some_epoch(1000));  // IPC 2.0, no reward yet
  EXPECT_EQ(mab.state().count[0], 0.0);
  const auto a = mab.epoch_tick(some_epoch(800));  // IPC 2.5 under arm 0
  EXPECT_DOUBLE_EQ(mab.state().reward_sum[0], 0.5);
  EXPECT_EQ(a, (CoordinationAction{1, 0}));
}

TEST(Hpac, Ladder) {
  const HpacThresholds th;  // 0.4, 0.7, 0.5, 0.8
  EXPECT_EQ(hpac_policy({0.9, 0.9, 0.1, 0.0}, th, 1, 4), (CoordinationAction{3, 4}));
  EXPECT_EQ(hpac_policy({0.5, 0.9, 0.1, 0.0}, th, 1, 4), (CoordinationAction{3, 2}));
  EXPECT_EQ(hpac_policy({0.1, 0.9, 0.1, 0.0}, th, 1, 4), (CoordinationAction{1, 0}));
  EXPECT_EQ(hpac_policy({0.1, 0.9, 0.99, 0.0}, th, 1, 4), (CoordinationAction{1, 0}));
  EXPECT_EQ(hpac_policy({0.9, 0.2, 0.95, 0.0}, th, 1, 4), (CoordinationAction{0, 0}));
  EXPECT_EQ(hpac_policy({0.9, 0.2, 0.1, 0.0}, th, 2, 4), (CoordinationAction{6, 4}));
}

TEST(Hpac, PureFunction) {
  const HpacThresholds th;
  const FeatureSnapshot f{0.45, 0.55, 0.3, 0.2};
  const auto a = hpac_policy(f, th, 1, 4);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(hpac_policy(f, th, 1, 4), a);
  HpacCoordinator c(1, 4, th);
  EpochTelemetry e = some_epoch(1000);
  e.prefetch_demand_hits = 36;  // accuracy 0.9
  EXPECT_EQ(c.epoch_tick(e), (CoordinationAction{2, 4}));
}

TEST(Hpac, ThresholdValidation) {
  HpacThresholds th;
  th.acc_pf_low = 0.9;
  EXPECT_THROW(th.validate(), std::invalid_argument);
  th = {};
  th.bw_high = 1.5;
  EXPECT_THROW(th.validate(), std::invalid_argument);
}

TEST(Tlp, Filter) {
  const FixedOcp onchip(false), offchip(true);
  EXPECT_FALSE(tlp_filter(onchip, 0x40, 0x1000, PrefetchLevel::kL1D));
  EXPECT_TRUE(tlp_filter(offchip, 0x40, 0x1000, PrefetchLevel::kL1D));
  EXPECT_FALSE(tlp_filter(offchip, 0x40, 0x1000, PrefetchLevel::kL2C));
}

TEST(StaticBest, Examples) {
  EXPECT_EQ(static_best({{0, 1.0}, {1, 1.1}, {2, 0.9}, {3, 1.05}}, 4), 1u);
  EXPECT_EQ(static_best({{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}}, 4), 0u);
  EXPECT_THROW(static_best({{0, 1.0}, {1, 1.1}, {2, 0.9}}, 4), MissingCombination);
  // Tie between ocp-only and pf-only goes to the lower index.
  EXPECT_EQ(static_best({{0, 0.5}, {1, 1.0}, {2, 1.0}, {3, 1.0}}, 4), 1u);
  // With two prefetchers, a single mechanism beats a tied pair.
  EXPECT_EQ(static_best({{0, 0.5}, {1, 0.5}, {2, 0.5}, {3, 0.9}, {4, 0.8}, {5, 0.5}, {6, 0.5}, {7, 0.5}}, 8), 3u);
  EXPECT_EQ(static_best({{0, 0.5}, {1, 0.5}, {2, 0.5}, {3, 0.9}, {4, 0.9}, {5, 0.5}, {6, 0.5}, {7, 0.5}}, 8), 4u);
}
