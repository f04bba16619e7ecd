#ifndef TRIMKS_RNG_HPP_
#define TRIMKS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace trimks {

// Self-contained RNG so that seeded runs are bit-identical across platforms
// and standard libraries. std::uniform_*_distribution is implementation
// defined and must not appear anywhere on a seeded path.

/// splitmix64 finalizer; also used as the seed-mixing primitive.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// stream identifiers: fold-left of mix64(state ^ mix64(id)).
/// This is the documented sub-seed function for bootstrap iteration b
/// (derive_seed(seed, {b})) and for toytrain's per-model randomness
/// sources (derive_seed(master, {model, source})).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = mix64(master);
  for (std::uint64_t id : path) {
    state = mix64(state ^ mix64(id));
  }
  return state;
}

/// xoshiro256** generator, seeded through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) {
      sm = mix64(sm);
      word = sm;
    }
    // mix64 never yields four zero words from any input, so state is valid
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl_(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl_(s_[3], 45);
    return result;
  }

  /// Uniform double in [0,1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform index in [0, n); n must be positive. Multiply-shift bound,
  /// bias below 2^-64 is irrelevant at the sample sizes used here.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (cosine branch; one draw per call so the
  /// stream layout stays independent of call parity).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi_ * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl_(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static constexpr double kPi_ = 3.14159265358979323846;
  std::uint64_t s_[4];
};

}  // namespace trimks

#endif  // TRIMKS_RNG_HPP_
