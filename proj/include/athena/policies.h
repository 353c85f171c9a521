#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "athena/coordinator.h"
#include "athena/speculators.h"

namespace athena {

// Always both enabled at d_max.
class NaiveCoordinator : public Coordinator {
 public:
  using Coordinator::Coordinator;
  std::string name() const override { return "naive"; }
  CoordinationAction initial_action() override { return top(); }

 protected:
  CoordinationAction decide(const EpochTelemetry&, const FeatureSnapshot&) override { return top(); }

 private:
  CoordinationAction top() const { return {num_actions_ - 1, d_max_}; }
};

// A fixed enable set for the whole run (none / off-only / pf-only / ...).
class StaticCoordinator : public Coordinator {
 public:
  StaticCoordinator(uint32_t prefetchers, uint32_t d_max, uint32_t action);
  std::string name() const override;
  CoordinationAction initial_action() override { return action_; }

 protected:
  CoordinationAction decide(const EpochTelemetry&, const FeatureSnapshot&) override { return action_; }

 private:
  CoordinationAction action_;
};

// Discounted UCB over the coordination lattice.
struct MabState {
  std::vector<double> reward_sum;
  std::vector<double> count;
  double discount = 0.99;
  double exploration = 2.0;

  explicit MabState(uint32_t arms, double discount = 0.99, double exploration = 2.0);
  uint32_t arms() const { return static_cast<uint32_t>(count.size()); }
};

uint32_t mab_select(const MabState& mab);
void mab_update(MabState& mab, uint32_t arm, double reward);

class MabCoordinator : public Coordinator {
 public:
  MabCoordinator(uint32_t prefetchers, uint32_t d_max, double discount, double exploration);
  std::string name() const override { return "mab"; }
  CoordinationAction initial_action() override;
  const MabState& state() const { return mab_; }

 protected:
  CoordinationAction decide(const EpochTelemetry& epoch, const FeatureSnapshot&) override;

 private:
  MabState mab_;
  uint32_t current_arm_ = 0;
  std::optional<double> prev_ipc_;
};

struct HpacThresholds {
  double acc_pf_low = 0.4;
  double acc_pf_high = 0.7;
  double acc_ocp_low = 0.5;
  double bw_high = 0.8;

  void validate() const;
};

// Rule ladder; every prefetcher follows the same enable/degree decision.
CoordinationAction hpac_policy(const FeatureSnapshot& f, const HpacThresholds& th, uint32_t prefetchers,
                               uint32_t d_max);

class HpacCoordinator : public Coordinator {
 public:
  HpacCoordinator(uint32_t prefetchers, uint32_t d_max, const HpacThresholds& th);
  std::string name() const override { return "hpac"; }
  CoordinationAction initial_action() override { return {num_actions_ - 1, d_max_}; }

 protected:
  CoordinationAction decide(const EpochTelemetry&, const FeatureSnapshot& f) override {
    return hpac_policy(f, th_, prefetchers_, d_max_);
  }

 private:
  HpacThresholds th_;
};

// TLP-style filter: drop an L1D prefetch the OCP predicts to be served
// off-chip. L2C prefetches always pass.
enum class PrefetchLevel { kL1D, kL2C };
bool tlp_filter(const OffChipPredictor& ocp, uint64_t trigger_pc, uint64_t prefetch_addr, PrefetchLevel level);

class MissingCombination : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Best static combination by whole-run IPC; ties go to fewer enabled
// mechanisms, then the lower index.
uint32_t static_best(const std::map<uint32_t, double>& ipc_by_action, uint32_t actions);

}  // namespace athena
