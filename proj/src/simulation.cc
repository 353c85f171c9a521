#include "athena/simulation.h"

#include <algorithm>
#include <stdexcept>

#include "athena/policies.h"

namespace athena {

uint32_t SpeculatorConfig::prefetcher_count() const {
  return (l1d_pf != "none" ? 1u : 0u) + (l2c_pf != "none" ? 1u : 0u);
}

std::string SpeculatorConfig::pf_label() const {
  if (l1d_pf == "none") return l2c_pf;
  if (l2c_pf == "none") return l1d_pf;
  return l1d_pf + "+" + l2c_pf;
}

void SpeculatorConfig::validate() const {
  if (l1d_pf != "none" && l1d_pf != "stride") throw std::invalid_argument("l1d_pf: expected none|stride, got '" + l1d_pf + "'");
  if (l2c_pf != "none" && l2c_pf != "stream") throw std::invalid_argument("l2c_pf: expected none|stream, got '" + l2c_pf + "'");
  if (ocp != "none" && ocp != "perceptron" && ocp != "history")
    throw std::invalid_argument("ocp: expected none|perceptron|history, got '" + ocp + "'");
  if (ocp_history_bits > 64) throw std::invalid_argument("ocp_history_bits: must be <= 64");
}

MemorySystem::MemorySystem(const HierarchyConfig& mem, const SpeculatorConfig& specs, FeatureTracker& tracker)
    : specs_(specs), hierarchy_(mem), tracker_(tracker) {
  specs_.validate();
  int bit = 0;
  if (specs_.l1d_pf == "stride") {
    stride_ = std::make_unique<StridePrefetcher>();
    stride_bit_ = bit++;
  }
  if (specs_.l2c_pf == "stream") {
    stream_ = std::make_unique<StreamPrefetcher>();
    stream_bit_ = bit++;
  }
  if (specs_.ocp == "perceptron")
    ocp_ = std::make_unique<PerceptronOcp>(specs_.ocp_activation_threshold, specs_.ocp_training_threshold);
  else if (specs_.ocp == "history")
    ocp_ = std::make_unique<HistoryOcp>(specs_.ocp_history_bits);
  hierarchy_.set_eviction_listener(
      [this](uint64_t line, bool by_prefetch) { tracker_.on_llc_eviction(line, by_prefetch); });
}

uint32_t MemorySystem::degree_for(uint32_t prefetcher) const {
  return action_.pf_enabled(prefetcher) ? action_.degree : 0;
}

void MemorySystem::issue_prefetches(const std::vector<uint64_t>& lines, Level level, uint64_t pc, uint64_t cycle) {
  uint64_t last = ~uint64_t{0};
  for (uint64_t line : lines) {
    if (line == last) continue;
    last = line;
    if (specs_.tlp_filter && ocp_ &&
        tlp_filter(*ocp_, pc, line * kLineBytes, level == Level::kL1D ? PrefetchLevel::kL1D : PrefetchLevel::kL2C))
      continue;
    if (!hierarchy_.prefetch_fill(line, level, cycle)) continue;
    ++pending_.prefetches_issued;
    tracker_.on_prefetch_issued(line);
  }
}

uint64_t MemorySystem::load(uint64_t pc, uint64_t addr, uint64_t cycle) {
  const uint64_t line = line_of(addr);

  bool ocp_issued = false;
  std::optional<uint64_t> ocp_completion;
  if (ocp_ && action_.ocp_enabled() && ocp_->predict(pc, addr)) {
    ocp_issued = true;
    ++pending_.ocp_predictions;
    ocp_completion = hierarchy_.ocp_request(line, cycle + specs_.ocp_issue_latency);
  }

  const AccessResult res = hierarchy_.demand_access(line, cycle, ocp_completion);
  const bool offchip = res.level == Level::kDram;

  if ((res.level != Level::kL1D || res.first_use_of_prefetch) && tracker_.on_demand_access(line))
    ++pending_.prefetch_demand_hits;
  if (offchip) {
    if (tracker_.on_demand_llc_miss(line)) ++pending_.pollution_hits;
    if (ocp_issued) ++pending_.ocp_correct;
  }
  if (ocp_) ocp_->train(pc, addr, offchip);

  if (stride_) {
    std::vector<uint64_t> lines;
    for (uint64_t a : stride_->observe(pc, addr, degree_for(stride_bit_))) lines.push_back(line_of(a));
    issue_prefetches(lines, Level::kL1D, pc, cycle);
  }
  if (stream_ && res.level != Level::kL1D)
    issue_prefetches(stream_->observe(line, degree_for(stream_bit_)), Level::kL2C, pc, cycle);

  return res.completion;
}

void MemorySystem::store(uint64_t, uint64_t addr, uint64_t cycle) { hierarchy_.store_access(line_of(addr), cycle); }

void MemorySystem::drain_epoch(EpochTelemetry& epoch) {
  hierarchy_.drain_epoch(epoch);
  epoch.prefetches_issued += pending_.prefetches_issued;
  epoch.prefetch_demand_hits += pending_.prefetch_demand_hits;
  epoch.ocp_predictions += pending_.ocp_predictions;
  epoch.ocp_correct += pending_.ocp_correct;
  epoch.pollution_hits += pending_.pollution_hits;
  pending_ = EpochTelemetry{};
}

SimulationResult simulate(const SimulationConfig& cfg, std::span<const TraceRecord> trace, Coordinator& coordinator) {
  if (trace.empty()) throw std::invalid_argument("trace is empty");
  if (cfg.sim_instructions == 0) throw std::invalid_argument("sim_instructions: must be > 0");
  cfg.core.validate();
  cfg.memory.validate();
  if (coordinator.prefetchers() != cfg.speculators.prefetcher_count())
    throw std::invalid_argument("coordinator and speculator configuration disagree on the prefetcher count");

  MemorySystem mem(cfg.memory, cfg.speculators, coordinator.tracker());
  Core core(cfg.core, mem);

  SimulationResult out;
  out.action_hist.assign(coordinator.actions(), 0);
  const uint64_t total = cfg.warmup_instructions + cfg.sim_instructions;

  CoordinationAction action = coordinator.initial_action();
  mem.set_action(action);

  auto record_epoch = [&](const EpochTelemetry& e, uint64_t retired_after) {
    if (retired_after <= cfg.warmup_instructions) return;
    out.epochs.push_back(e);
    out.actions.push_back(action.index);
    ++out.action_hist[action.index];
    out.totals += e;
  };

  size_t i = 0;
  while (core.retired() < total) {
    auto epoch = core.step(trace[i]);
    if (++i == trace.size()) i = 0;
    if (!epoch) continue;
    record_epoch(*epoch, core.retired());
    action = coordinator.epoch_tick(*epoch);
    mem.set_action(action);
  }
  if (auto tail = core.finish()) record_epoch(*tail, core.retired());

  out.retired = out.totals.retired_instructions;
  out.cycles = out.totals.cycles;
  out.ipc = out.cycles ? static_cast<double>(out.retired) / static_cast<double>(out.cycles) : 0.0;
  return out;
}

}  // namespace athena
