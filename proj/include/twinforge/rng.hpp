#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace twinforge {

// splitmix64 step; also the mixing primitive for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stateless hash of (seed, parts...). Used to derive independent sub-seeds
// and to make per-(entity, slot) draws that do not depend on call order.
inline std::uint64_t mix64(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = seed ^ 0xD6E8FEB86659FD93ULL;
  for (std::uint64_t p : parts) {
    s ^= p + 0x9E3779B97F4A7C15ULL + (s << 6) + (s >> 2);
    std::uint64_t t = s;
    s = splitmix64(t);
  }
  std::uint64_t t = s;
  return splitmix64(t);
}

template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t base, Parts... parts) {
  return mix64(base, {static_cast<std::uint64_t>(parts)...});
}

// mt19937_64 with explicit variate transforms. The engine output sequence is
// pinned by the standard, and doing our own uniform/normal conversions keeps
// streams bit-identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive range. Modulo bias is < 2^-32 for the ranges used here.
  long uniform_int(long lo, long hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(eng_() % span);
  }

  // Box-Muller; caches the spare variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double exponential(double mean) {
    double u = 0.0;
    while (u <= 0.0) u = uniform();
    return -mean * std::log(u);
  }

  // Pareto with shape alpha and scale xm (support [xm, inf)).
  double pareto(double alpha, double xm) {
    double u = 0.0;
    while (u <= 0.0) u = uniform();
    return xm / std::pow(u, 1.0 / alpha);
  }

  // Index drawn proportionally to non-negative weights.
  std::size_t discrete(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double x = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      x -= weights[i];
      if (x < 0.0) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace twinforge
