#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dmflow {

// splitmix64 generator with explicit stream derivation.
//
// Simulation code never draws from a shared engine directly; it derives a
// child stream per (purpose, index...) so results do not depend on the order
// in which independent pieces of work run. Draw primitives are implemented
// here rather than with <random> distributions so output is identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t uniform_u64(std::uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Inclusive integer range.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    uniform_u64(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // [0, 1) with 53 bits of precision.
  double uniform_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform_double() < p; }

  // Index into a cumulative-weight table; weights need not be normalized.
  std::size_t pick_weighted(std::span<const double> cumulative) {
    double total = cumulative.back();
    double u = uniform_double() * total;
    std::size_t lo = 0, hi = cumulative.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (cumulative[mid] <= u) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  // Child stream keyed by up to three tags. Children with distinct keys are
  // independent of each other and of further draws on the parent.
  Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t s = state_;
    s = mix(s ^ 0x8f462907e54c3d21ULL, a);
    s = mix(s, b + 0x3c6ef372fe94f82bULL);
    s = mix(s, c + 0xbb67ae8584caa73bULL);
    return Rng(s);
  }

 private:
  static std::uint64_t mix(std::uint64_t h, std::uint64_t k) {
    h += k;
    h = (h ^ (h >> 33)) * 0xff51afd7ed558ccdULL;
    h = (h ^ (h >> 29)) * 0xc4ceb9fe1a85ec53ULL;
    return h ^ (h >> 32);
  }

  std::uint64_t state_;
};

}  // namespace dmflow
