#include "athena/bloom.h"

namespace athena {

void BloomFilter::hashes(uint64_t line, size_t out[kHashes]) {
  // Two independent multiply-xorshift mixes; each keeps its top 12 bits.
  uint64_t a = line * 0x9e3779b97f4a7c15ULL;
  a ^= a >> 29;
  a *= 0xbf58476d1ce4e5b9ULL;
  uint64_t b = (line ^ 0x5851f42d4c957f2dULL) * 0xd6e8feb86659fd93ULL;
  b ^= b >> 32;
  b *= 0x94d049bb133111ebULL;
  out[0] = static_cast<size_t>(a >> 52);
  out[1] = static_cast<size_t>(b >> 52);
}

void BloomFilter::insert(uint64_t line) {
  size_t h[kHashes];
  hashes(line, h);
  for (size_t i = 0; i < kHashes; ++i) bits_.set(h[i]);
}

bool BloomFilter::query(uint64_t line) const {
  size_t h[kHashes];
  hashes(line, h);
  for (size_t i = 0; i < kHashes; ++i)
    if (!bits_.test(h[i])) return false;
  return true;
}

}  // namespace athena
