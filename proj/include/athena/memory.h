#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <unordered_map>
#include <vector>

#include "athena/core.h"

namespace athena {

inline constexpr uint64_t kLineBytes = 64;
inline constexpr uint64_t line_of(uint64_t addr) { return addr / kLineBytes; }

enum class Level : uint8_t { kL1D = 0, kL2C = 1, kLLC = 2, kDram = 3 };
const char* to_string(Level level);

struct CacheLevelConfig {
  uint64_t capacity = 0;
  uint32_t associativity = 1;
  uint32_t line_size = kLineBytes;
  uint32_t round_trip_latency = 1;
  uint32_t mshr_count = 16;
  bool fill_on_prefetch = true;  // may be the target of prefetch fills

  uint64_t sets() const { return capacity / (uint64_t{associativity} * line_size); }
  void validate(const char* name) const;
};

struct DramConfig {
  uint32_t access_latency = 100;
  uint32_t bus_occupancy = 80;  // cycles per 64 B transfer
  uint32_t queue_capacity = 64;

  void validate() const;
};

// Bus occupancy in cycles per line for a per-core bandwidth in GB/s at 4 GHz.
uint32_t occupancy_for_bandwidth(double gbs);

struct HierarchyConfig {
  CacheLevelConfig l1d{48 * 1024, 12, kLineBytes, 5, 16, true};
  CacheLevelConfig l2c{1280 * 1024, 20, kLineBytes, 15, 48, true};
  CacheLevelConfig llc{3 * 1024 * 1024, 12, kLineBytes, 55, 64, true};
  DramConfig dram;

  void validate() const;
};

struct CacheLine {
  uint64_t tag = 0;  // full line address
  bool valid = false;
  bool prefetched = false;  // set on prefetch fill, cleared on first demand hit
  uint64_t lru_stamp = 0;
  uint64_t ready = 0;  // cycle the data arrives; later than now while in flight
};

class Cache {
 public:
  explicit Cache(const CacheLevelConfig& cfg);

  CacheLine* find(uint64_t line);
  const CacheLine* find(uint64_t line) const;
  void touch(CacheLine& l) { l.lru_stamp = ++stamp_; }
  // Installs `line`; returns the valid victim it displaced, if any.
  std::optional<CacheLine> insert(uint64_t line, uint64_t ready, bool prefetched);
  void invalidate(uint64_t line);

  const CacheLevelConfig& config() const { return cfg_; }
  uint64_t valid_lines() const;

 private:
  CacheLevelConfig cfg_;
  uint64_t sets_;
  uint64_t stamp_ = 0;
  std::vector<CacheLine> lines_;
};

enum class RequestClass : uint8_t { kDemand = 0, kPrefetch = 1, kOcp = 2 };

struct DramCounters {
  uint64_t requests[3] = {0, 0, 0};  // bus transfers per RequestClass
  uint64_t busy_cycles = 0;
  uint64_t dropped_prefetch = 0;
  uint64_t dropped_ocp = 0;
  uint64_t coalesced = 0;
};

// FIFO bandwidth model: one transfer of bus_occupancy cycles per request,
// access_latency pipelined across requests. Requests for a line already in
// flight coalesce onto the in-flight transfer.
class Dram {
 public:
  explicit Dram(const DramConfig& cfg);

  // Completion cycle, or nullopt when a prefetch/ocp request is dropped on a
  // full queue. Demand requests stall instead of dropping.
  std::optional<uint64_t> enqueue(uint64_t line, RequestClass cls, uint64_t arrival);

  // Completion of an in-flight transfer for `line` still pending at `cycle`.
  std::optional<uint64_t> in_flight(uint64_t line, uint64_t cycle) const;

  const DramCounters& counters() const { return counters_; }
  DramCounters take_counters();
  const DramConfig& config() const { return cfg_; }

 private:
  void retire_until(uint64_t cycle);

  DramConfig cfg_;
  uint64_t bus_free_ = 0;
  std::unordered_map<uint64_t, uint64_t> pending_;  // line -> completion
  std::priority_queue<std::pair<uint64_t, uint64_t>, std::vector<std::pair<uint64_t, uint64_t>>,
                      std::greater<>>
      by_completion_;
  DramCounters counters_;
};

// Outstanding-miss tracker for one cache level.
class MshrFile {
 public:
  explicit MshrFile(uint32_t capacity) : capacity_(capacity) {}
  bool full_at(uint64_t cycle);
  // Earliest cycle >= `cycle` at which an entry is free.
  uint64_t free_at(uint64_t cycle);
  void add(uint64_t completion) { busy_.push(completion); }

 private:
  void expire(uint64_t cycle);
  uint32_t capacity_;
  std::priority_queue<uint64_t, std::vector<uint64_t>, std::greater<>> busy_;
};

struct AccessResult {
  uint64_t completion = 0;
  Level level = Level::kL1D;
  bool first_use_of_prefetch = false;
};

struct HierarchyCounters {
  uint64_t llc_misses = 0;  // demand and prefetch
  uint64_t demand_llc_misses = 0;
  uint64_t llc_miss_latency_sum = 0;  // demand only
  uint64_t prefetch_duplicates = 0;
  uint64_t prefetch_dropped = 0;
};

// Inclusive three-level hierarchy over a Dram. Cache state changes at request
// time; in-flight lines carry their arrival cycle in CacheLine::ready.
class Hierarchy {
 public:
  using EvictionListener = std::function<void(uint64_t line, bool evicted_by_prefetch)>;

  explicit Hierarchy(const HierarchyConfig& cfg);

  // `ocp_completion` is the completion of an off-chip-predicted request that
  // was enqueued for this line at prediction time.
  AccessResult demand_access(uint64_t line, uint64_t issue, std::optional<uint64_t> ocp_completion = {});
  bool prefetch_fill(uint64_t line, Level fill_level, uint64_t issue);
  void store_access(uint64_t line, uint64_t issue);

  // Enqueues an off-chip-predicted request reaching the controller at `arrival`.
  std::optional<uint64_t> ocp_request(uint64_t line, uint64_t arrival) {
    return dram_.enqueue(line, RequestClass::kOcp, arrival);
  }

  void set_eviction_listener(EvictionListener fn) { on_llc_evict_ = std::move(fn); }

  bool contains(Level level, uint64_t line) const;
  const Cache& cache(Level level) const { return caches_[static_cast<int>(level)]; }
  Dram& dram() { return dram_; }
  const HierarchyCounters& counters() const { return counters_; }
  const HierarchyConfig& config() const { return cfg_; }
  // Moves memory-side counters into `epoch` and resets them.
  void drain_epoch(EpochTelemetry& epoch);

  // Latency of the probe path from L1D down to and including `level`.
  uint64_t path_latency(Level level) const;

 private:
  Cache& at(Level level) { return caches_[static_cast<int>(level)]; }
  void fill(Level level, uint64_t line, uint64_t ready, bool prefetched, bool by_prefetch);
  void clear_prefetched(uint64_t line);

  HierarchyConfig cfg_;
  std::vector<Cache> caches_;
  std::vector<MshrFile> mshrs_;
  Dram dram_;
  EvictionListener on_llc_evict_;
  HierarchyCounters counters_;
};

// dram_busy_cycles / epoch_cycles clamped to [0, 1].
double bandwidth_usage(const EpochTelemetry& epoch, uint64_t epoch_cycles);

}  // namespace athena
