#pragma once

#include <cstdint>

namespace colav {

// splitmix64: deterministic across platforms, used for scenario randomization
// and trial-seed derivation.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

inline std::uint64_t derive_seed(std::uint64_t campaign_seed, std::uint64_t stream) {
  SplitMix64 mix(campaign_seed ^ (0xa0761d6478bd642fULL + stream * 0xe7037ed1a0b428dbULL));
  return mix.next();
}

}  // namespace colav
