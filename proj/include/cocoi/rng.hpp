#pragma once

#include <cmath>
#include <cstdint>

namespace cocoi {

// SplitMix64 (Steele/Lea/Flood). One 64-bit word of state, fast to seed, and
// fully deterministic across platforms -- std:: distributions are not, and
// reproducibility of simulation output under a fixed seed is a hard
// requirement here.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1); 53 significant bits so 1 - u never rounds to 0
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // log-uniform over [lo, hi], lo > 0
  double next_log_in(double lo, double hi) {
    return std::exp(next_in(std::log(lo), std::log(hi)));
  }

  // unit-mean exponential
  double next_exponential() { return -std::log(1.0 - next_unit()); }

  // uniform integer in [0, bound); Lemire multiply-shift, bound > 0
  std::uint32_t next_below(std::uint32_t bound) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64() >> 32) * bound) >> 32);
  }

 private:
  std::uint64_t state_;
};

// stable combiner for deriving per-trial / per-worker seeds from a master seed
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace cocoi
