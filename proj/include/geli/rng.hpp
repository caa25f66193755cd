#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "geli/errors.hpp"

namespace geli {

/// One step of the splitmix64 generator. Advances `state` and returns the
/// next value. Also used to expand a single seed into engine state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of `s`, optionally with a non-standard basis.
inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t basis = 14695981039346656037ull) {
  std::uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Deterministic pseudo-random stream (xoshiro256++ core).
///
/// All sampling used by dataset generation goes through this class so that a
/// given integer seed reproduces the same bytes on every platform. The only
/// floating-point library calls in the sampling path are sqrt and log (used
/// by the Marsaglia polar method in normal()).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via the Marsaglia polar method. Pairs of candidates are
  /// drawn until one lands inside the unit disc; the second value of each
  /// accepted pair is cached for the next call.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  /// Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw NumericError("uniform_index: n must be positive");
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  /// Derives an independent stream id from a base seed, a purpose tag and up
  /// to two indices. Used to give every (trajectory, step, stage) its own
  /// stream so serial and batched execution sample identically.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = seed ^ fnv1a64(tag);
    std::uint64_t out = splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ull + 0x1000193;
    out ^= splitmix64(s);
    s ^= b * 0xc2b2ae3d27d4eb4full + 0x811c9dc5;
    out ^= splitmix64(s);
    return out;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace geli
