#pragma once

#include <cmath>
#include <cstdint>

namespace dsta {

// Deterministic generator: xoshiro256++ seeded through splitmix64.
// The algorithm is fixed so that equal seeds produce equal streams on
// every platform; checkpoints and test expectations depend on it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n); rejection sampling.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t min = (0ULL - n) % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r < min);
    return r % n;
  }

  // Standard normal via Box-Muller on the fixed stream.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Independent substream: state derived from (seed-mix, stream tag).
  Rng derive(std::uint64_t stream) const {
    std::uint64_t x = state_[0] ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    Rng r(0);
    for (auto& s : r.state_) s = splitmix64(x);
    return r;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

}  // namespace dsta
