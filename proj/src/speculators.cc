#include "athena/speculators.h"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace athena {

namespace {

uint64_t mix(uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return x;
}

}  // namespace

std::vector<uint64_t> StridePrefetcher::observe(uint64_t pc, uint64_t addr, uint32_t degree) {
  Entry& e = table_[index(pc)];
  if (!e.valid || e.pc != pc) {
    e = Entry{pc, addr, 0, 0, true};
    return {};
  }
  const int64_t stride = static_cast<int64_t>(addr - e.last_addr);
  if (stride == 0) return {};
  if (stride == e.last_stride) {
    e.confidence = std::min<uint8_t>(3, e.confidence + 1);
  } else if (e.confidence >= 2) {
    --e.confidence;
  } else {
    e.last_stride = stride;
    e.confidence = 1;
  }
  e.last_addr = addr;

  std::vector<uint64_t> out;
  if (e.confidence < 2) return out;
  for (uint32_t k = 1; k <= degree; ++k) out.push_back(addr + static_cast<uint64_t>(e.last_stride * k));
  return out;
}

std::vector<uint64_t> StreamPrefetcher::observe(uint64_t line, uint32_t degree) {
  const uint64_t region = line / kRegionLines;
  Entry* e = nullptr;
  for (auto& cand : table_)
    if (cand.valid && cand.region == region) e = &cand;

  if (e == nullptr) {
    e = &table_[0];
    for (auto& cand : table_) {
      if (!cand.valid) {
        e = &cand;
        break;
      }
      if (cand.lru < e->lru) e = &cand;
    }
    *e = Entry{region, line, 1, true, true, 0};
  } else if (line != e->last_line) {
    const int dir = line > e->last_line ? 1 : -1;
    e->trained = dir == e->direction;
    e->direction = dir;
    e->last_line = line;
  }
  e->lru = ++stamp_;

  std::vector<uint64_t> out;
  if (!e->trained) return out;
  for (uint32_t k = 1; k <= degree; ++k) {
    const int64_t next = static_cast<int64_t>(line) + e->direction * static_cast<int64_t>(k);
    if (next < 0) break;
    out.push_back(static_cast<uint64_t>(next));
  }
  return out;
}

PerceptronOcp::PerceptronOcp(int activation_threshold, int training_threshold)
    : activation_threshold_(activation_threshold), training_threshold_(training_threshold) {}

std::array<size_t, PerceptronOcp::kFeatures> PerceptronOcp::indices(uint64_t pc, uint64_t addr) const {
  const uint64_t line_offset = (addr >> 6) & 63;  // cacheline within the 4 KB page
  const uint64_t byte_offset = addr & 63;
  return {
      static_cast<size_t>(mix(pc) % kTableSize),
      static_cast<size_t>(mix(pc ^ (line_offset << 20)) % kTableSize),
      static_cast<size_t>(byte_offset),
      static_cast<size_t>(offchip_history_),
  };
}

int PerceptronOcp::sum(uint64_t pc, uint64_t addr) const {
  const auto idx = indices(pc, addr);
  int s = 0;
  for (size_t f = 0; f < kFeatures; ++f) s += weights_[f][idx[f]];
  return s;
}

bool PerceptronOcp::predict(uint64_t pc, uint64_t addr) const {
  return sum(pc, addr) >= activation_threshold_;
}

void PerceptronOcp::train(uint64_t pc, uint64_t addr, bool went_offchip) {
  const auto idx = indices(pc, addr);
  const int s = sum(pc, addr);
  const bool predicted = s >= activation_threshold_;
  if (predicted != went_offchip || std::abs(s) < training_threshold_) {
    for (size_t f = 0; f < kFeatures; ++f) {
      int8_t& w = weights_[f][idx[f]];
      if (went_offchip && w < kWeightMax) ++w;
      if (!went_offchip && w > kWeightMin) --w;
    }
  }
  offchip_history_ = static_cast<uint8_t>((offchip_history_ << 1) | (went_offchip ? 1 : 0));
}

HistoryOcp::HistoryOcp(uint32_t history_bits)
    : history_mask_(history_bits >= 64 ? ~uint64_t{0} : (uint64_t{1} << history_bits) - 1) {
  table_.fill(1);
}

bool HistoryOcp::predict(uint64_t pc, uint64_t) const { return table_[index(pc)] >= 2; }

void HistoryOcp::train(uint64_t pc, uint64_t, bool went_offchip) {
  uint8_t& c = table_[index(pc)];
  if (went_offchip && c < 3) ++c;
  if (!went_offchip && c > 0) --c;
  history_ = ((history_ << 1) | (went_offchip ? 1 : 0)) & history_mask_;
}

std::unique_ptr<OffChipPredictor> make_ocp(const std::string& kind) {
  if (kind == "none") return nullptr;
  if (kind == "perceptron") return std::make_unique<PerceptronOcp>();
  if (kind == "history") return std::make_unique<HistoryOcp>();
  throw std::invalid_argument("unknown ocp '" + kind + "'");
}

}  // namespace athena
