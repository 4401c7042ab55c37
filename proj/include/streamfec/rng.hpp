#pragma once

#include <cstdint>

namespace streamfec {

// SplitMix64. Pinned here instead of <random> because the standard
// distributions are not bit-reproducible across implementations, and
// generated traces have to match between machines and runs.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next()
  {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound), bound > 0. Rejection-sampled, no modulo bias.
  std::uint64_t next_below(std::uint64_t bound)
  {
    const std::uint64_t limit = ~0ULL - ~0ULL % bound;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Derived independent stream.
  SplitMix64 split() { return SplitMix64(next() ^ 0x6a09e667f3bcc909ULL); }

private:
  std::uint64_t state_;
};

}  // namespace streamfec
