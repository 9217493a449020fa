#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bg {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for replicate `index` of a run seeded with `seed`. Each replicate owns
/// its own stream, so results do not depend on how replicates are scheduled.
inline constexpr std::uint64_t substream_seed(std::uint64_t seed,
                                              std::uint64_t index) noexcept {
  return splitmix64_mix(splitmix64_mix(seed + 0x9e3779b97f4a7c15ULL) ^
                        splitmix64_mix(index * 0xd1b54a32d192ed03ULL + 1));
}

/// splitmix64 generator with the handful of draws the toolkit needs. All
/// transforms are written out here so outputs are identical across standard
/// library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) noexcept
      : state_(substream_seed(seed, stream)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64_mix(state_);
  }

  /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % bound;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  bool coin() noexcept { return ((*this)() >> 63) != 0; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  /// Poisson draw by inversion; fine for the small means used by the
  /// synthetic corpus generator.
  std::uint64_t poisson(double mean) noexcept {
    if (mean <= 0.0) return 0;
    const double l = std::exp(-mean);
    std::uint64_t k = 0;
    double p = uniform();
    while (p > l) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bg
