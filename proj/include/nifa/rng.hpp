#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

#include "nifa/common.hpp"

namespace nifa {

// 64-bit FNV-1a; turns stream labels into seed material.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// SplitMix64 output function, used as a seed scrambler.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

//! Seeded random stream. Consumers derive child streams from (seed, label),
//! so results never depend on evaluation order or thread scheduling. The
//! distributions are implemented here rather than taken from <random> so
//! that output is identical across standard libraries.
class Stream {
public:
  explicit Stream(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Stream derive(std::string_view label) const {
    return Stream(splitmix64(seed_ ^ fnv1a64(label)));
  }

  Stream derive(std::string_view label, std::uint64_t index) const {
    return Stream(splitmix64(seed_ ^ fnv1a64(label) ^
                             (0x9e3779b97f4a7c15ull * (index + 1))));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on the open interval (0,1); endpoints are never returned.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Stream::below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double exponential() { return -std::log(uniform()); }

  double chi_squared(int df) {
    double s = 0.0;
    for (int i = 0; i < df; ++i) {
      const double z = normal();
      s += z * z;
    }
    return s;
  }

  // Gamma with integer shape r and unit scale.
  double gamma_int(int r) {
    double s = 0.0;
    for (int i = 0; i < r; ++i) s += exponential();
    return s;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = 0; i + 1 < items.size(); ++i) {
      const std::size_t j = i + below(items.size() - i);
      std::swap(items[i], items[j]);
    }
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace nifa
