#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

// Seeded RNG with hand-rolled distribution transforms. The standard library's
// normal/uniform distributions are implementation-defined, so every draw here
// goes through explicit arithmetic on mt19937_64 output to keep generated
// artifacts byte-identical across toolchains.
namespace atcline {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Independent child stream for a named sub-task. Forking depends only on
  // the construction seed, never on how many draws were taken.
  Rng fork(std::string_view tag) const { return Rng(seed_ ^ fnv1a64(tag)); }
  Rng fork(std::uint64_t index) const {
    return Rng(seed_ ^ (0x9e3779b97f4a7c15ull * (index + 1)));
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive, by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Box-Muller; draws two uniforms per call, no cached second value.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Rejection-sampled lower truncation; falls back to the bound if the tail
  // is effectively unreachable.
  double truncated_normal(double mean, double sd, double min_value) {
    for (int i = 0; i < 1000; ++i) {
      const double x = normal(mean, sd);
      if (x >= min_value) return x;
    }
    return min_value;
  }

  // Two-sided rejection; falls back to the clamped mean.
  double truncated_normal(double mean, double sd, double lo, double hi) {
    for (int i = 0; i < 1000; ++i) {
      const double x = normal(mean, sd);
      if (x >= lo && x <= hi) return x;
    }
    return std::min(std::max(mean, lo), hi);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace atcline
