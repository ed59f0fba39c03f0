#include "ice/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ice/error.hpp"

namespace ice {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::uniform_index: empty range");
  // Accept x < limit, where limit is the largest multiple of n that fits.
  const std::uint64_t rem = (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
  for (;;) {
    const std::uint64_t x = engine_();
    if (rem == 0 || x <= limit) return x % n;
  }
}

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ice
