#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace qunet {

// 64-bit linear congruential generator (MMIX constants a = 6364136223846793005,
// c = 1442695040888963407). Every random draw in the project goes through this
// class so that runs are reproducible bit-for-bit across platforms and standard
// libraries. Draws use the high state bits; the low bits of an LCG are weak.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return state_;
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in [0, n). Top 32 state bits modulo n; n is tiny everywhere this
  // is used, so the modulo bias is irrelevant next to determinism.
  std::uint32_t below(std::uint32_t n) {
    return static_cast<std::uint32_t>(next_u64() >> 32) % n;
  }

  bool coin() { return (next_u64() >> 63) != 0; }

 private:
  std::uint64_t state_;
};

// Seeded Fisher-Yates shuffle driven by the LCG above.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.below(static_cast<std::uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace qunet
