#pragma once

#include <cstdint>
#include <random>

namespace lapmrf {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seeds for (stream, index) pairs under one master seed.  Used by the
// harness to give every run its own parameter and sampler streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index);
}

// mt19937_64 with explicit bit-to-double conversion.  The engine's output
// sequence is fixed by the standard and the conversion below avoids
// std::uniform_real_distribution, whose results vary across standard
// libraries, so streams reproduce bit-for-bit on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // uniform in [0, 1), 53 random mantissa bits
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace lapmrf
