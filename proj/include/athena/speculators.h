#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace athena {

// Per-PC stride detector at L1D. Emits byte addresses addr + k*stride.
class StridePrefetcher {
 public:
  static constexpr size_t kEntries = 256;

  struct Entry {
    uint64_t pc = 0;
    uint64_t last_addr = 0;
    int64_t last_stride = 0;
    uint8_t confidence = 0;  // 0..3, emits at >= 2
    bool valid = false;
  };

  // Trains on the access and returns up to `degree` prefetch addresses.
  std::vector<uint64_t> observe(uint64_t pc, uint64_t addr, uint32_t degree);
  const Entry& entry(uint64_t pc) const { return table_[index(pc)]; }

 private:
  static size_t index(uint64_t pc) { return static_cast<size_t>((pc ^ (pc >> 8) ^ (pc >> 16)) % kEntries); }
  std::array<Entry, kEntries> table_{};
};

// Region-based stream detector at L2C over cacheline addresses. A new stream
// starts out following the ascending direction; a reversal retrains it and it
// emits again once the new direction repeats.
class StreamPrefetcher {
 public:
  static constexpr size_t kEntries = 16;
  static constexpr uint64_t kRegionLines = 64;  // 4 KB

  struct Entry {
    uint64_t region = 0;
    uint64_t last_line = 0;
    int direction = 1;
    bool trained = false;
    bool valid = false;
    uint64_t lru = 0;
  };

  std::vector<uint64_t> observe(uint64_t line, uint32_t degree);
  const std::array<Entry, kEntries>& entries() const { return table_; }

 private:
  std::array<Entry, kEntries> table_{};
  uint64_t stamp_ = 0;
};

// Binary off-chip predictor interface. predict() must not mutate state.
class OffChipPredictor {
 public:
  virtual ~OffChipPredictor() = default;
  virtual bool predict(uint64_t pc, uint64_t addr) const = 0;
  virtual void train(uint64_t pc, uint64_t addr, bool went_offchip) = 0;
  virtual std::string name() const = 0;
};

// Hashed perceptron over four features with 6-bit saturating weights.
class PerceptronOcp : public OffChipPredictor {
 public:
  static constexpr size_t kFeatures = 4;
  static constexpr size_t kTableSize = 256;
  static constexpr int kWeightMin = -32;
  static constexpr int kWeightMax = 31;

  explicit PerceptronOcp(int activation_threshold = 0, int training_threshold = 14);

  bool predict(uint64_t pc, uint64_t addr) const override;
  void train(uint64_t pc, uint64_t addr, bool went_offchip) override;
  std::string name() const override { return "perceptron"; }

  int sum(uint64_t pc, uint64_t addr) const;
  std::array<size_t, kFeatures> indices(uint64_t pc, uint64_t addr) const;
  int8_t& weight(size_t feature, size_t index) { return weights_[feature][index]; }
  int8_t weight(size_t feature, size_t index) const { return weights_[feature][index]; }

 private:
  int activation_threshold_;
  int training_threshold_;
  uint8_t offchip_history_ = 0;  // last 8 outcomes
  std::array<std::array<int8_t, kTableSize>, kFeatures> weights_{};
};

// gshare-style table of 2-bit counters indexed by pc ^ off-chip history.
class HistoryOcp : public OffChipPredictor {
 public:
  static constexpr size_t kTableSize = 4096;

  explicit HistoryOcp(uint32_t history_bits = 12);

  bool predict(uint64_t pc, uint64_t addr) const override;
  void train(uint64_t pc, uint64_t addr, bool went_offchip) override;
  std::string name() const override { return "history"; }

  uint8_t counter(uint64_t pc) const { return table_[index(pc)]; }

 private:
  size_t index(uint64_t pc) const { return static_cast<size_t>((pc ^ history_) % kTableSize); }

  uint64_t history_mask_;
  uint64_t history_ = 0;
  std::array<uint8_t, kTableSize> table_;
};

std::unique_ptr<OffChipPredictor> make_ocp(const std::string& kind);

}  // namespace athena
