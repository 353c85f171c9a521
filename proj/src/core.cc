#include "athena/core.h"

#include <stdexcept>

namespace athena {

void CoreConfig::validate() const {
  if (retire_width < 1 || window_size < 1 || max_outstanding_loads < 1 || mispredict_penalty < 1 ||
      epoch_length < 1)
    throw std::invalid_argument("core parameters must all be >= 1");
  if (epoch_length < retire_width) throw std::invalid_argument("epoch_length must be >= retire_width");
}

EpochTelemetry& EpochTelemetry::operator+=(const EpochTelemetry& o) {
  cycles += o.cycles;
  retired_instructions += o.retired_instructions;
  loads += o.loads;
  mispredicted_branches += o.mispredicted_branches;
  llc_misses += o.llc_misses;
  llc_miss_latency_sum += o.llc_miss_latency_sum;
  prefetches_issued += o.prefetches_issued;
  prefetch_demand_hits += o.prefetch_demand_hits;
  ocp_predictions += o.ocp_predictions;
  ocp_correct += o.ocp_correct;
  dram_requests_demand += o.dram_requests_demand;
  dram_requests_prefetch += o.dram_requests_prefetch;
  dram_requests_ocp += o.dram_requests_ocp;
  dram_busy_cycles += o.dram_busy_cycles;
  demand_llc_misses += o.demand_llc_misses;
  pollution_hits += o.pollution_hits;
  return *this;
}

Gshare::Gshare(uint32_t table_bits, uint32_t history_bits)
    : table_bits_(table_bits),
      history_mask_(history_bits >= 64 ? ~uint64_t{0} : (uint64_t{1} << history_bits) - 1),
      table_(size_t{1} << table_bits, 1) {}

size_t Gshare::index(uint64_t pc) const {
  return static_cast<size_t>((pc ^ history_) & ((uint64_t{1} << table_bits_) - 1));
}

bool Gshare::predict(uint64_t pc) const { return table_[index(pc)] >= 2; }

bool Gshare::predict_and_train(uint64_t pc, bool taken) {
  uint8_t& ctr = table_[index(pc)];
  const bool mispredicted = (ctr >= 2) != taken;
  if (taken && ctr < 3) ++ctr;
  if (!taken && ctr > 0) --ctr;
  history_ = ((history_ << 1) | (taken ? 1 : 0)) & history_mask_;
  return mispredicted;
}

Core::Core(const CoreConfig& cfg, MemoryPort& mem) : cfg_(cfg), mem_(mem), retire_ring_(cfg.window_size, 0) {
  cfg_.validate();
}

std::optional<EpochTelemetry> Core::step(const TraceRecord& rec) {
  // Dispatch: in order, retire_width per cycle, bounded by the window, the
  // outstanding-load limit and any mispredict bubble.
  uint64_t d = std::max(last_dispatch_, dispatch_blocked_until_);
  if (seq_ >= cfg_.window_size) d = std::max(d, retire_ring_[seq_ % cfg_.window_size] + 1);
  const bool is_load = rec.kind == RecordKind::kLoad;
  if (is_load) {
    while (!outstanding_loads_.empty() && outstanding_loads_.top() <= d) outstanding_loads_.pop();
    while (outstanding_loads_.size() >= cfg_.max_outstanding_loads) {
      d = std::max(d, outstanding_loads_.top());
      while (!outstanding_loads_.empty() && outstanding_loads_.top() <= d) outstanding_loads_.pop();
    }
  }
  if (d == last_dispatch_ && dispatched_in_cycle_ >= cfg_.retire_width) ++d;
  if (d != last_dispatch_) dispatched_in_cycle_ = 0;
  last_dispatch_ = d;
  ++dispatched_in_cycle_;

  uint64_t complete = d;
  switch (rec.kind) {
    case RecordKind::kLoad:
      complete = mem_.load(rec.pc, rec.addr, rec.dependent ? std::max(d, last_load_complete_) : d);
      last_load_complete_ = complete;
      outstanding_loads_.push(complete);
      ++epoch_.loads;
      break;
    case RecordKind::kStore:
      mem_.store(rec.pc, rec.addr, d);
      break;
    case RecordKind::kCondBranch:
      if (bp_.predict_and_train(rec.pc, rec.taken)) {
        ++epoch_.mispredicted_branches;
        dispatch_blocked_until_ = d + cfg_.mispredict_penalty + 1;
      }
      break;
    case RecordKind::kOther:
      break;
  }

  // Retire: in order, retire_width per cycle, not before completion.
  uint64_t r = std::max(complete, last_retire_);
  if (retired_total_ > 0 && r == last_retire_ && retired_in_cycle_ >= cfg_.retire_width) ++r;
  if (r != last_retire_) retired_in_cycle_ = 0;
  last_retire_ = r;
  ++retired_in_cycle_;
  retire_ring_[seq_ % cfg_.window_size] = r;
  ++seq_;

  ++retired_total_;
  ++epoch_.retired_instructions;
  if (epoch_.retired_instructions == cfg_.epoch_length) return close_epoch();
  return std::nullopt;
}

std::optional<EpochTelemetry> Core::finish() {
  if (epoch_.retired_instructions == 0) return std::nullopt;
  return close_epoch();
}

EpochTelemetry Core::close_epoch() {
  EpochTelemetry out = epoch_;
  out.cycles = last_retire_ + 1 - epoch_start_cycle_;
  epoch_start_cycle_ = last_retire_ + 1;
  mem_.drain_epoch(out);
  epoch_ = EpochTelemetry{};
  return out;
}

}  // namespace athena
