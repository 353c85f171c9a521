#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "athena/bloom.h"
#include "athena/core.h"

namespace athena {

// --- Feature measurement -----------------------------------------------------

struct FeatureSnapshot {
  double pf_accuracy = 0.0;
  double ocp_accuracy = 0.0;
  double bw_usage = 0.0;
  double cache_pollution = 0.0;
  // Telemetry only; not part of the state vector.
  double pf_bw_share = 0.0;
  double ocp_bw_share = 0.0;
  double demand_bw_share = 0.0;
};

FeatureSnapshot measure_features(const EpochTelemetry& epoch);

// Bloom-filter trackers for prefetch accuracy and prefetch-induced LLC
// pollution. Cleared at every epoch boundary.
class FeatureTracker {
 public:
  void on_prefetch_issued(uint64_t line) { accuracy_.insert(line); }
  bool on_demand_access(uint64_t line) const { return accuracy_.query(line); }
  void on_llc_eviction(uint64_t line, bool by_prefetch) {
    if (by_prefetch) pollution_.insert(line);
  }
  bool on_demand_llc_miss(uint64_t line) const { return pollution_.query(line); }
  void reset() {
    accuracy_.reset();
    pollution_.reset();
  }

  const BloomFilter& accuracy_filter() const { return accuracy_; }
  const BloomFilter& pollution_filter() const { return pollution_; }

 private:
  BloomFilter accuracy_;
  BloomFilter pollution_;
};

// --- State --------------------------------------------------------------------

enum FeatureBit : uint8_t {
  kFeaturePfAccuracy = 1 << 0,
  kFeatureOcpAccuracy = 1 << 1,
  kFeatureBwUsage = 1 << 2,
  kFeaturePollution = 1 << 3,
};
inline constexpr uint8_t kAllFeatures = 0xF;

struct QuantizedState {
  uint16_t value = 0;  // pf | ocp | bw | pollution, 3 bits each, high to low
  bool operator==(const QuantizedState&) const = default;
};

uint32_t feature_bucket(double f);
// Features outside `mask` quantize to bucket 0.
QuantizedState quantize_state(const FeatureSnapshot& f, uint8_t mask = kAllFeatures);

// --- Actions ------------------------------------------------------------------

// Index bit 0 enables the OCP, bit (p+1) enables prefetcher p.
struct CoordinationAction {
  uint32_t index = 0;
  uint32_t degree = 0;

  bool ocp_enabled() const { return (index & 1) != 0; }
  bool pf_enabled(uint32_t p) const { return ((index >> (p + 1)) & 1) != 0; }
  bool any_pf() const { return (index >> 1) != 0; }
  bool operator==(const CoordinationAction&) const = default;
};

inline constexpr uint32_t num_actions(uint32_t prefetchers) { return 1u << (prefetchers + 1); }

// --- QVStore -----------------------------------------------------------------

// Eight independently hashed planes of 64 rows x A signed 8-bit entries
// (scale 1/16). A Q-value is the sum of its partial values across planes.
class QVStore {
 public:
  static constexpr size_t kPlanes = 8;
  static constexpr size_t kRows = 64;
  static constexpr double kScale = 16.0;
  static constexpr double kMinQ = -128.0 / kScale;
  static constexpr double kMaxQ = 127.0 / kScale;
  static constexpr std::array<uint32_t, kPlanes> kPlaneSeeds = {
      0x9E3779B1u, 0x85EBCA77u, 0xC2B2AE3Du, 0x27D4EB2Fu,
      0x165667B1u, 0xD3A2646Du, 0xFD7046C5u, 0xB55A4F09u,
  };

  explicit QVStore(uint32_t actions = 4, double q_init = 0.0);

  static size_t row_index(size_t plane, QuantizedState s);

  double lookup(QuantizedState s, uint32_t action) const;
  std::vector<double> values(QuantizedState s) const;
  // Adds `delta` to Q(s, a), split across planes with round-to-nearest on the
  // total and the remainder spread one unit at a time from plane 0. Saturates.
  void update(QuantizedState s, uint32_t action, double delta);

  int8_t raw(size_t plane, size_t row, uint32_t action) const { return entries_[offset(plane, row, action)]; }
  void set_raw(size_t plane, size_t row, uint32_t action, int8_t v) { entries_[offset(plane, row, action)] = v; }

  uint32_t actions() const { return actions_; }
  size_t storage_bytes() const { return entries_.size() * sizeof(int8_t); }

 private:
  size_t offset(size_t plane, size_t row, uint32_t action) const {
    return (plane * kRows + row) * actions_ + action;
  }
  int raw_sum(QuantizedState s, uint32_t action) const;

  uint32_t actions_;
  std::vector<int8_t> entries_;
};

// --- Policy primitives ---------------------------------------------------------

// Greedy over Q with probability 1 - epsilon (ties to the lowest index),
// otherwise uniform. Consumes exactly one draw, plus one more when exploring.
uint32_t select_action(const QVStore& store, QuantizedState s, double epsilon, std::mt19937_64& rng);

// Q-value-driven prefetch degree for the chosen action; 0 when it enables no
// prefetcher, otherwise at least 1.
uint32_t prefetch_degree_from_q(std::span<const double> q, uint32_t chosen, double tau, uint32_t d_max);
uint32_t select_prefetch_degree(const QVStore& store, QuantizedState s, CoordinationAction chosen, double tau,
                                uint32_t d_max);

struct RewardWeights {
  double cycle = 1.6;
  double llc_miss = 0.0;
  double llc_latency = 0.0;
  double load = 0.6;
  double mispredicted_branch = 1.0;

  void validate() const;
};

inline constexpr double kRewardClamp = 8.0;

// Correlated minus uncorrelated reward over per-instruction deltas
// (prev - curr) / N, clamped to +-8.
double compute_reward(const EpochTelemetry& prev, const EpochTelemetry& curr, const RewardWeights& w,
                      uint64_t epoch_length);

// One SARSA step on Q(s, a) toward r + gamma * Q(s_next, a_next). Returns the
// requested delta (before fixed-point rounding and saturation).
double sarsa_delta(const QVStore& store, QuantizedState s, uint32_t a, double reward, QuantizedState s_next,
                   uint32_t a_next, double alpha, double gamma);
void sarsa_update(QVStore& store, QuantizedState s, uint32_t a, double reward, QuantizedState s_next,
                  uint32_t a_next, double alpha, double gamma);

// --- Coordinators -------------------------------------------------------------

// Base for every coordination policy. epoch_tick measures the finished epoch,
// asks the policy for the next decision and clears the trackers.
class Coordinator {
 public:
  Coordinator(uint32_t prefetchers, uint32_t d_max);
  virtual ~Coordinator() = default;

  virtual std::string name() const = 0;
  // Decision in force during the first epoch.
  virtual CoordinationAction initial_action() = 0;
  CoordinationAction epoch_tick(const EpochTelemetry& epoch);

  FeatureTracker& tracker() { return tracker_; }
  uint32_t actions() const { return num_actions_; }
  uint32_t prefetchers() const { return prefetchers_; }
  uint32_t d_max() const { return d_max_; }

 protected:
  virtual CoordinationAction decide(const EpochTelemetry& epoch, const FeatureSnapshot& features) = 0;

  uint32_t prefetchers_;
  uint32_t num_actions_;
  uint32_t d_max_;
  FeatureTracker tracker_;
};

struct AthenaConfig {
  double alpha = 0.6;
  double gamma = 0.6;
  double epsilon = 0.0;
  double tau = 0.12;
  uint32_t d_max = 4;
  double q_init = 0.0;
  uint64_t update_delay_cycles = 0;
  uint64_t epoch_length = 2000;
  uint8_t feature_mask = kAllFeatures;
  RewardWeights weights;
  uint64_t seed = 0;

  void validate() const;
};

class AthenaCoordinator : public Coordinator {
 public:
  AthenaCoordinator(const AthenaConfig& cfg, uint32_t prefetchers = 1);

  std::string name() const override { return "athena"; }
  CoordinationAction initial_action() override;

  const QVStore& store() const { return store_; }
  QVStore& store() { return store_; }
  std::optional<QuantizedState> last_state() const { return prev_state_; }
  size_t pending_updates() const { return pending_.size(); }

 protected:
  CoordinationAction decide(const EpochTelemetry& epoch, const FeatureSnapshot& features) override;

 private:
  struct PendingUpdate {
    uint64_t due_cycle;
    QuantizedState state;
    uint32_t action;
    double delta;
  };
  void apply_due_updates();

  AthenaConfig cfg_;
  QVStore store_;
  std::mt19937_64 rng_;
  uint64_t now_ = 0;  // core cycles elapsed at the current epoch boundary
  std::deque<PendingUpdate> pending_;
  std::optional<EpochTelemetry> prev_epoch_;
  std::optional<QuantizedState> prev_state_;
  uint32_t prev_action_ = 0;
};

}  // namespace athena
