#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "athena/trace.h"

namespace athena {

struct CoreConfig {
  uint32_t retire_width = 6;
  uint32_t window_size = 512;
  uint32_t max_outstanding_loads = 16;
  uint32_t mispredict_penalty = 17;
  uint64_t epoch_length = 2000;

  void validate() const;
};

// Per-epoch counters. The core fills the instruction-side fields; the memory
// side is merged in by MemoryPort::drain_epoch.
struct EpochTelemetry {
  uint64_t cycles = 0;
  uint64_t retired_instructions = 0;
  uint64_t loads = 0;
  uint64_t mispredicted_branches = 0;
  uint64_t llc_misses = 0;
  uint64_t llc_miss_latency_sum = 0;
  uint64_t prefetches_issued = 0;
  uint64_t prefetch_demand_hits = 0;
  uint64_t ocp_predictions = 0;
  uint64_t ocp_correct = 0;
  uint64_t dram_requests_demand = 0;
  uint64_t dram_requests_prefetch = 0;
  uint64_t dram_requests_ocp = 0;
  uint64_t dram_busy_cycles = 0;
  uint64_t demand_llc_misses = 0;
  uint64_t pollution_hits = 0;

  bool operator==(const EpochTelemetry&) const = default;
  EpochTelemetry& operator+=(const EpochTelemetry& o);
};

// What the core needs from the memory system.
class MemoryPort {
 public:
  virtual ~MemoryPort() = default;
  // Returns the completion cycle of a load dispatched at `cycle`.
  virtual uint64_t load(uint64_t pc, uint64_t addr, uint64_t cycle) = 0;
  virtual void store(uint64_t pc, uint64_t addr, uint64_t cycle) = 0;
  // Adds the memory-side counters accumulated since the last call and resets them.
  virtual void drain_epoch(EpochTelemetry& epoch) = 0;
};

// gshare: 2-bit counters indexed by (pc ^ global history) mod table size.
class Gshare {
 public:
  explicit Gshare(uint32_t table_bits = 12, uint32_t history_bits = 12);

  bool predict(uint64_t pc) const;
  // Predicts, trains with the real outcome and returns whether it mispredicted.
  bool predict_and_train(uint64_t pc, bool taken);

  uint8_t counter(uint64_t pc) const { return table_[index(pc)]; }

 private:
  size_t index(uint64_t pc) const;

  uint32_t table_bits_;
  uint64_t history_mask_;
  uint64_t history_ = 0;
  std::vector<uint8_t> table_;  // starts weakly not-taken (1)
};

// Dispatch/retire window timing model. Instructions are processed in program
// order and each one's dispatch, completion and retire cycles are resolved as
// it is stepped, so the model never needs to revisit an instruction.
class Core {
 public:
  Core(const CoreConfig& cfg, MemoryPort& mem);

  // Returns the telemetry of the epoch this record completed, if any.
  std::optional<EpochTelemetry> step(const TraceRecord& rec);
  // Closes a trailing partial epoch.
  std::optional<EpochTelemetry> finish();

  uint64_t retired() const { return retired_total_; }
  // Cycles elapsed up to and including the last retirement.
  uint64_t cycle() const { return retired_total_ ? last_retire_ + 1 : 0; }
  const CoreConfig& config() const { return cfg_; }

 private:
  EpochTelemetry close_epoch();

  CoreConfig cfg_;
  MemoryPort& mem_;
  Gshare bp_;

  uint64_t last_dispatch_ = 0;
  uint32_t dispatched_in_cycle_ = 0;
  uint64_t dispatch_blocked_until_ = 0;

  uint64_t last_retire_ = 0;
  uint32_t retired_in_cycle_ = 0;

  std::vector<uint64_t> retire_ring_;  // retire cycles of the last window_size instructions
  uint64_t seq_ = 0;
  std::priority_queue<uint64_t, std::vector<uint64_t>, std::greater<>> outstanding_loads_;
  uint64_t last_load_complete_ = 0;

  uint64_t retired_total_ = 0;
  uint64_t epoch_start_cycle_ = 0;
  EpochTelemetry epoch_;
};

}  // namespace athena
