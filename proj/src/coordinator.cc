#include "athena/coordinator.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace athena {

namespace {

double ratio(uint64_t num, uint64_t den) {
  if (den == 0) return 0.0;
  return std::clamp(static_cast<double>(num) / static_cast<double>(den), 0.0, 1.0);
}

double per_instruction_delta(uint64_t prev, uint64_t curr, uint64_t n) {
  return (static_cast<double>(prev) - static_cast<double>(curr)) / static_cast<double>(n);
}

}  // namespace

FeatureSnapshot measure_features(const EpochTelemetry& e) {
  FeatureSnapshot f;
  f.pf_accuracy = ratio(e.prefetch_demand_hits, e.prefetches_issued);
  f.ocp_accuracy = ratio(e.ocp_correct, e.ocp_predictions);
  f.bw_usage = ratio(e.dram_busy_cycles, e.cycles);
  f.cache_pollution = ratio(e.pollution_hits, e.demand_llc_misses);
  const uint64_t total = e.dram_requests_demand + e.dram_requests_prefetch + e.dram_requests_ocp;
  f.pf_bw_share = ratio(e.dram_requests_prefetch, total);
  f.ocp_bw_share = ratio(e.dram_requests_ocp, total);
  f.demand_bw_share = ratio(e.dram_requests_demand, total);
  return f;
}

uint32_t feature_bucket(double f) {
  if (!(f > 0.0)) return 0;
  return std::min<uint32_t>(7, static_cast<uint32_t>(std::floor(f * 8.0)));
}

QuantizedState quantize_state(const FeatureSnapshot& f, uint8_t mask) {
  auto bucket = [mask](double v, uint8_t bit) { return (mask & bit) ? feature_bucket(v) : 0u; };
  const uint32_t packed = bucket(f.pf_accuracy, kFeaturePfAccuracy) << 9 |
                          bucket(f.ocp_accuracy, kFeatureOcpAccuracy) << 6 |
                          bucket(f.bw_usage, kFeatureBwUsage) << 3 | bucket(f.cache_pollution, kFeaturePollution);
  return QuantizedState{static_cast<uint16_t>(packed)};
}

QVStore::QVStore(uint32_t actions, double q_init)
    : actions_(actions), entries_(kPlanes * kRows * actions, 0) {
  if (actions == 0) throw std::invalid_argument("QVStore needs at least one action");
  // Spread q_init over the planes the same way update() spreads a delta.
  const long total = std::clamp(std::lround(q_init * kScale), -128L, 127L);
  const long base = total / static_cast<long>(kPlanes);
  const long rem = total - base * static_cast<long>(kPlanes);
  for (size_t p = 0; p < kPlanes; ++p) {
    const long v = base + (static_cast<long>(p) < std::labs(rem) ? (rem > 0 ? 1 : -1) : 0);
    for (size_t r = 0; r < kRows; ++r)
      for (uint32_t a = 0; a < actions_; ++a) entries_[offset(p, r, a)] = static_cast<int8_t>(v);
  }
}

size_t QVStore::row_index(size_t plane, QuantizedState s) {
  const uint32_t h = static_cast<uint32_t>(s.value) * kPlaneSeeds[plane];
  return (h >> 20) % kRows;
}

int QVStore::raw_sum(QuantizedState s, uint32_t action) const {
  int sum = 0;
  for (size_t p = 0; p < kPlanes; ++p) sum += entries_[offset(p, row_index(p, s), action)];
  return sum;
}

double QVStore::lookup(QuantizedState s, uint32_t action) const {
  return std::clamp(raw_sum(s, action) / kScale, kMinQ, kMaxQ);
}

std::vector<double> QVStore::values(QuantizedState s) const {
  std::vector<double> q(actions_);
  for (uint32_t a = 0; a < actions_; ++a) q[a] = lookup(s, a);
  return q;
}

void QVStore::update(QuantizedState s, uint32_t action, double delta) {
  const int current = std::clamp(raw_sum(s, action), -128, 127);
  const long target = std::clamp(current + std::lround(delta * kScale), -128L, 127L);
  const long total = target - current;
  const long base = total / static_cast<long>(kPlanes);
  const long rem = total - base * static_cast<long>(kPlanes);
  for (size_t p = 0; p < kPlanes; ++p) {
    const long add = base + (static_cast<long>(p) < std::labs(rem) ? (rem > 0 ? 1 : -1) : 0);
    int8_t& e = entries_[offset(p, row_index(p, s), action)];
    e = static_cast<int8_t>(std::clamp(e + add, -128L, 127L));
  }
}

uint32_t select_action(const QVStore& store, QuantizedState s, double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<uint32_t> pick(0, store.actions() - 1);
    return pick(rng);
  }
  uint32_t best = 0;
  double best_q = store.lookup(s, 0);
  for (uint32_t a = 1; a < store.actions(); ++a) {
    const double q = store.lookup(s, a);
    if (q > best_q) {
      best = a;
      best_q = q;
    }
  }
  return best;
}

uint32_t prefetch_degree_from_q(std::span<const double> q, uint32_t chosen, double tau, uint32_t d_max) {
  if (q.size() < 2) return d_max;
  const double others =
      (std::accumulate(q.begin(), q.end(), 0.0) - q[chosen]) / static_cast<double>(q.size() - 1);
  const double confidence = std::clamp((q[chosen] - others) / tau, 0.0, 1.0);
  // The small bias keeps exact ratios such as 0.06 / 0.12 from flooring down.
  const auto degree = static_cast<uint32_t>(std::floor(confidence * d_max + 1e-9));
  return std::max<uint32_t>(1, degree);
}

uint32_t select_prefetch_degree(const QVStore& store, QuantizedState s, CoordinationAction chosen, double tau,
                                uint32_t d_max) {
  if (!chosen.any_pf()) return 0;
  const std::vector<double> q = store.values(s);
  return prefetch_degree_from_q(q, chosen.index, tau, d_max);
}

void RewardWeights::validate() const {
  for (double w : {cycle, llc_miss, llc_latency, load, mispredicted_branch})
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("reward weights must be finite and >= 0");
}

double compute_reward(const EpochTelemetry& prev, const EpochTelemetry& curr, const RewardWeights& w,
                      uint64_t n) {
  if (n == 0) throw std::invalid_argument("epoch length must be positive");
  const double correlated = w.cycle * per_instruction_delta(prev.cycles, curr.cycles, n) +
                            w.llc_miss * per_instruction_delta(prev.llc_misses, curr.llc_misses, n) +
                            w.llc_latency * per_instruction_delta(prev.llc_miss_latency_sum, curr.llc_miss_latency_sum, n);
  const double uncorrelated =
      w.load * per_instruction_delta(prev.loads, curr.loads, n) +
      w.mispredicted_branch * per_instruction_delta(prev.mispredicted_branches, curr.mispredicted_branches, n);
  return std::clamp(correlated - uncorrelated, -kRewardClamp, kRewardClamp);
}

double sarsa_delta(const QVStore& store, QuantizedState s, uint32_t a, double reward, QuantizedState s_next,
                   uint32_t a_next, double alpha, double gamma) {
  return alpha * (reward + gamma * store.lookup(s_next, a_next) - store.lookup(s, a));
}

void sarsa_update(QVStore& store, QuantizedState s, uint32_t a, double reward, QuantizedState s_next,
                  uint32_t a_next, double alpha, double gamma) {
  store.update(s, a, sarsa_delta(store, s, a, reward, s_next, a_next, alpha, gamma));
}

Coordinator::Coordinator(uint32_t prefetchers, uint32_t d_max)
    : prefetchers_(prefetchers), num_actions_(num_actions(prefetchers)), d_max_(d_max) {}

CoordinationAction Coordinator::epoch_tick(const EpochTelemetry& epoch) {
  const FeatureSnapshot features = measure_features(epoch);
  const CoordinationAction next = decide(epoch, features);
  tracker_.reset();
  return next;
}

void AthenaConfig::validate() const {
  for (double v : {alpha, gamma, epsilon})
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("alpha, gamma and epsilon must lie in [0, 1]");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (d_max < 1) throw std::invalid_argument("d_max must be >= 1");
  if (epoch_length < 1) throw std::invalid_argument("epoch_length must be >= 1");
  weights.validate();
}

AthenaCoordinator::AthenaCoordinator(const AthenaConfig& cfg, uint32_t prefetchers)
    : Coordinator(prefetchers, cfg.d_max), cfg_(cfg), store_(num_actions(prefetchers), cfg.q_init), rng_(cfg.seed) {
  cfg_.validate();
}

CoordinationAction AthenaCoordinator::initial_action() {
  CoordinationAction a{select_action(store_, QuantizedState{}, cfg_.epsilon, rng_), 0};
  a.degree = select_prefetch_degree(store_, QuantizedState{}, a, cfg_.tau, cfg_.d_max);
  prev_action_ = a.index;
  return a;
}

void AthenaCoordinator::apply_due_updates() {
  while (!pending_.empty() && pending_.front().due_cycle <= now_) {
    const PendingUpdate& u = pending_.front();
    store_.update(u.state, u.action, u.delta);
    pending_.pop_front();
  }
}

CoordinationAction AthenaCoordinator::decide(const EpochTelemetry& epoch, const FeatureSnapshot& features) {
  now_ += epoch.cycles;
  apply_due_updates();

  const QuantizedState s = quantize_state(features, cfg_.feature_mask);
  CoordinationAction next{select_action(store_, s, cfg_.epsilon, rng_), 0};
  next.degree = select_prefetch_degree(store_, s, next, cfg_.tau, cfg_.d_max);

  // The epoch just measured ran under prev_action_ from prev_state_; its reward
  // compares it to the epoch before.
  if (prev_epoch_ && prev_state_) {
    const double reward = compute_reward(*prev_epoch_, epoch, cfg_.weights, cfg_.epoch_length);
    const double delta = sarsa_delta(store_, *prev_state_, prev_action_, reward, s, next.index, cfg_.alpha, cfg_.gamma);
    if (cfg_.update_delay_cycles == 0) {
      store_.update(*prev_state_, prev_action_, delta);
    } else {
      pending_.push_back({now_ + cfg_.update_delay_cycles, *prev_state_, prev_action_, delta});
    }
  }

  prev_epoch_ = epoch;
  prev_state_ = s;
  prev_action_ = next.index;
  return next;
}

}  // namespace athena
