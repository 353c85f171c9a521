#include "athena/policies.h"

#include <bit>
#include <cmath>
#include <limits>

namespace athena {

StaticCoordinator::StaticCoordinator(uint32_t prefetchers, uint32_t d_max, uint32_t action)
    : Coordinator(prefetchers, d_max), action_{action, 0} {
  if (action >= num_actions_) throw std::invalid_argument("static action out of range");
  if (action_.any_pf()) action_.degree = d_max;
}

std::string StaticCoordinator::name() const { return "static-" + std::to_string(action_.index); }

MabState::MabState(uint32_t arms, double discount_, double exploration_)
    : reward_sum(arms, 0.0), count(arms, 0.0), discount(discount_), exploration(exploration_) {}

uint32_t mab_select(const MabState& mab) {
  for (uint32_t a = 0; a < mab.arms(); ++a)
    if (mab.count[a] <= 0.0) return a;
  double total = 0.0;
  for (double c : mab.count) total += c;
  uint32_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (uint32_t a = 0; a < mab.arms(); ++a) {
    const double mean = mab.reward_sum[a] / mab.count[a];
    const double bonus = std::sqrt(mab.exploration * std::log(std::max(total, 1.0)) / mab.count[a]);
    if (mean + bonus > best_score) {
      best_score = mean + bonus;
      best = a;
    }
  }
  return best;
}

void mab_update(MabState& mab, uint32_t arm, double reward) {
  for (uint32_t a = 0; a < mab.arms(); ++a) {
    mab.reward_sum[a] *= mab.discount;
    mab.count[a] *= mab.discount;
  }
  mab.reward_sum[arm] += reward;
  mab.count[arm] += 1.0;
}

MabCoordinator::MabCoordinator(uint32_t prefetchers, uint32_t d_max, double discount, double exploration)
    : Coordinator(prefetchers, d_max), mab_(num_actions(prefetchers), discount, exploration) {}

CoordinationAction MabCoordinator::initial_action() {
  current_arm_ = mab_select(mab_);
  CoordinationAction a{current_arm_, 0};
  if (a.any_pf()) a.degree = d_max_;
  return a;
}

CoordinationAction MabCoordinator::decide(const EpochTelemetry& epoch, const FeatureSnapshot&) {
  const double ipc = epoch.cycles ? static_cast<double>(epoch.retired_instructions) / epoch.cycles : 0.0;
  if (prev_ipc_) mab_update(mab_, current_arm_, ipc - *prev_ipc_);
  prev_ipc_ = ipc;
  current_arm_ = mab_select(mab_);
  CoordinationAction a{current_arm_, 0};
  if (a.any_pf()) a.degree = d_max_;
  return a;
}

void HpacThresholds::validate() const {
  for (double v : {acc_pf_low, acc_pf_high, acc_ocp_low, bw_high})
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("hpac thresholds must lie in [0, 1]");
  if (acc_pf_low > acc_pf_high) throw std::invalid_argument("hpac acc_pf_low must not exceed acc_pf_high");
}

CoordinationAction hpac_policy(const FeatureSnapshot& f, const HpacThresholds& th, uint32_t prefetchers,
                               uint32_t d_max) {
  uint32_t degree = 0;
  if (f.pf_accuracy >= th.acc_pf_high) {
    if (f.bw_usage < th.bw_high) degree = d_max;
  } else if (f.pf_accuracy >= th.acc_pf_low) {
    degree = std::max<uint32_t>(1, d_max / 2);
  }
  CoordinationAction a;
  if (degree > 0) a.index |= ((1u << prefetchers) - 1) << 1;
  if (f.ocp_accuracy >= th.acc_ocp_low) a.index |= 1;
  a.degree = degree;
  return a;
}

HpacCoordinator::HpacCoordinator(uint32_t prefetchers, uint32_t d_max, const HpacThresholds& th)
    : Coordinator(prefetchers, d_max), th_(th) {
  th_.validate();
}

bool tlp_filter(const OffChipPredictor& ocp, uint64_t trigger_pc, uint64_t prefetch_addr, PrefetchLevel level) {
  if (level != PrefetchLevel::kL1D) return false;
  return ocp.predict(trigger_pc, prefetch_addr);
}

uint32_t static_best(const std::map<uint32_t, double>& ipc_by_action, uint32_t actions) {
  for (uint32_t a = 0; a < actions; ++a)
    if (!ipc_by_action.count(a))
      throw MissingCombination("static combination " + std::to_string(a) + " has no result");
  uint32_t best = 0;
  for (uint32_t a = 1; a < actions; ++a) {
    const double q = ipc_by_action.at(a);
    const double b = ipc_by_action.at(best);
    if (q > b || (q == b && std::popcount(a) < std::popcount(best))) best = a;
  }
  return best;
}

}  // namespace athena
