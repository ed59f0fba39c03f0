#pragma once

#include <cstdint>
#include <random>

namespace ice {

// Portable seeded generator. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard. The distributions below are
// implemented here rather than taken from <random> because the standard
// leaves those implementation-defined:
//
//   uniform_index(n): rejection sampling on the raw 64-bit output; draws
//                     below 2^64 - (2^64 mod n) are accepted, result = x mod n.
//   uniform01():      (x >> 11) * 2^-53, in [0, 1).
//   normal():         Box-Muller on u1 = 1 - uniform01(), u2 = uniform01();
//                     returns sqrt(-2 ln u1) cos(2 pi u2). One normal per
//                     two raw draws, no cached spare.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  std::uint64_t uniform_index(std::uint64_t n);
  double uniform01();
  double normal();

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent stream seeds from one
// user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ice
