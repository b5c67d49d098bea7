#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sorct {

// SplitMix64 finalizer, used to derive independent substream seeds from a
// single run seed. Every consumer of randomness in the project obtains its
// engine through stream_seed so that one seed reproduces a whole run.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Fixed stream namespaces; keep values stable, they are part of the
// reproducibility contract.
enum : std::uint64_t {
  kStreamSplit = 1,
  kStreamStart = 2,
  kStreamTest = 3,
};

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t ns,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(seed ^ mix64(ns << 1));
  s = mix64(s ^ mix64(a << 1));
  return mix64(s ^ mix64(b << 1));
}

// mt19937_64 with the distribution code written out, so draws do not depend
// on the standard library's (implementation-defined) distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Unbiased integer in [0, n), n >= 1.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= lim);
    return r % n;
  }

  // [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Exponential with rate 1 (for Dirichlet/simplex sampling).
  double exponential() {
    double u;
    do {
      u = unit();
    } while (u <= 0.0);
    return -std::log(u);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace sorct
