#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "athena/coordinator.h"
#include "athena/core.h"
#include "athena/memory.h"
#include "athena/speculators.h"

namespace athena {

struct SpeculatorConfig {
  std::string l1d_pf = "none";    // none | stride
  std::string l2c_pf = "stream";  // none | stream
  std::string ocp = "perceptron"; // none | perceptron | history
  uint32_t ocp_issue_latency = 6;
  int ocp_activation_threshold = 0;
  int ocp_training_threshold = 14;
  uint32_t ocp_history_bits = 12;
  bool tlp_filter = false;

  // Prefetchers in coordination-bit order (L1D first).
  uint32_t prefetcher_count() const;
  std::string pf_label() const;
  void validate() const;
};

// The memory side seen by the core: hierarchy, speculators, feature
// tracking and the gating decision currently in force.
class MemorySystem : public MemoryPort {
 public:
  MemorySystem(const HierarchyConfig& mem, const SpeculatorConfig& specs, FeatureTracker& tracker);

  uint64_t load(uint64_t pc, uint64_t addr, uint64_t cycle) override;
  void store(uint64_t pc, uint64_t addr, uint64_t cycle) override;
  void drain_epoch(EpochTelemetry& epoch) override;

  void set_action(const CoordinationAction& a) { action_ = a; }
  const CoordinationAction& action() const { return action_; }
  Hierarchy& hierarchy() { return hierarchy_; }

 private:
  uint32_t degree_for(uint32_t prefetcher) const;
  void issue_prefetches(const std::vector<uint64_t>& lines, Level level, uint64_t pc, uint64_t cycle);

  SpeculatorConfig specs_;
  Hierarchy hierarchy_;
  FeatureTracker& tracker_;
  std::unique_ptr<StridePrefetcher> stride_;
  std::unique_ptr<StreamPrefetcher> stream_;
  std::unique_ptr<OffChipPredictor> ocp_;
  int stride_bit_ = -1;
  int stream_bit_ = -1;
  CoordinationAction action_;
  EpochTelemetry pending_;
};

struct SimulationConfig {
  CoreConfig core;
  HierarchyConfig memory;
  SpeculatorConfig speculators;
  uint64_t warmup_instructions = 100000;
  uint64_t sim_instructions = 1000000;
};

struct SimulationResult {
  std::vector<EpochTelemetry> epochs;  // measured window only
  std::vector<uint32_t> actions;       // action in force during each measured epoch
  std::vector<uint64_t> action_hist;
  EpochTelemetry totals;
  uint64_t retired = 0;
  uint64_t cycles = 0;
  double ipc = 0.0;
};

// Runs `coordinator` over the trace, replaying it from the start as often as
// needed. Warm-up epochs train everything but are not reported.
SimulationResult simulate(const SimulationConfig& cfg, std::span<const TraceRecord> trace, Coordinator& coordinator);

}  // namespace athena
