#pragma once

#include <cstdint>

namespace rotlab {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used both as the hash for
// deriving per-cell seeds and as a counter-based generator: draw k of a
// stream is mix64(seed + (k+1) * 0x9e3779b97f4a7c15), a pure function of
// (seed, k), so parallel consumers produce bit-identical streams in any
// evaluation order.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic seed derivation (boost-style combine on top of mix64).
inline uint64_t hash_combine(uint64_t seed, uint64_t value) {
  return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

// Counter-based uniform stream on [0, 1); bit-identical for a given seed
// regardless of how draws are scheduled across threads.
class CounterRng {
 public:
  explicit CounterRng(uint64_t seed) : seed_(seed) {}

  uint64_t bits(uint64_t counter) const {
    return mix64(seed_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
  }

  // 53-bit mantissa uniform in [0, 1).
  double uniform(uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

 private:
  uint64_t seed_;
};

}  // namespace rotlab
