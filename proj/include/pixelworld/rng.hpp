#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>

namespace pw {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stateless stream derivation: every consumer of randomness owns a generator
// seeded by derive_seed(master, phase, step, lane). Nothing in the codebase
// advances a shared stream, which is what makes resume and --threads N
// bit-reproducible.
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t s = seed;
  uint64_t h = splitmix64(s);
  s = h ^ (a * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull);
  h = splitmix64(s);
  s = h ^ (b * 0xbf58476d1ce4e5b9ull + 0x1ce4e5b9ull);
  h = splitmix64(s);
  s = h ^ (c * 0x94d049bb133111ebull + 0x133111ebull);
  return splitmix64(s);
}

// xoshiro256++
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : s_) w = splitmix64(s);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n); Lemire's multiply-shift with rejection.
  uint64_t below(uint64_t n) {
    uint64_t x = next();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    uint64_t l = static_cast<uint64_t>(m);
    if (l < n) {
      uint64_t t = (0 - n) % n;
      while (l < t) {
        x = next();
        m = static_cast<__uint128_t>(x) * n;
        l = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  int range(int lo, int hi) {  // inclusive ends
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  // Box-Muller. Always consumes exactly two uniforms; no cached spare, so the
  // draw count per call is fixed regardless of call history.
  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  void fill_normal(double* out, size_t n) {
    size_t i = 0;
    while (i + 1 < n) {
      double u1 = 1.0 - uniform();
      double u2 = uniform();
      double r = std::sqrt(-2.0 * std::log(u1));
      out[i++] = r * std::cos(6.283185307179586477 * u2);
      out[i++] = r * std::sin(6.283185307179586477 * u2);
    }
    if (i < n) out[i] = normal();
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace pw
