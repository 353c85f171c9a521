#pragma once

#include <bitset>
#include <cstdint>

namespace athena {

// 4096-bit Bloom filter with two hashes of the cacheline address.
class BloomFilter {
 public:
  static constexpr size_t kBits = 4096;
  static constexpr size_t kHashes = 2;

  void insert(uint64_t line);
  bool query(uint64_t line) const;
  void reset() { bits_.reset(); }

  size_t popcount() const { return bits_.count(); }
  static constexpr size_t storage_bytes() { return kBits / 8; }

 private:
  static void hashes(uint64_t line, size_t out[kHashes]);
  std::bitset<kBits> bits_;
};

}  // namespace athena
