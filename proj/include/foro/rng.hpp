#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace foro {

/// splitmix64 finalizer; used to fan a master seed out into independent streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives the seed of substream `stream` from `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x51A3C0FFEEULL));
}

// Stream identifiers for derive_seed. Values are part of the reproducibility contract.
namespace seed_stream {
inline constexpr std::uint64_t kBackbone = 1;
inline constexpr std::uint64_t kProjection = 2;
inline constexpr std::uint64_t kCma = 3;
inline constexpr std::uint64_t kData = 4;
inline constexpr std::uint64_t kMinibatch = 5;
}  // namespace seed_stream

/// Portable seeded generator. std::normal_distribution is implementation-defined,
/// so Gaussian draws go through Box-Muller on raw mt19937_64 output instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    // Rejection keeps the draw unbiased and the sequence platform-independent.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = 0;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  /// Fisher-Yates with below(); std::shuffle's sequence is not portable.
  template <typename Range>
  void shuffle(Range& range) {
    using std::swap;
    const auto n = static_cast<std::uint64_t>(std::size(range));
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      swap(range[i - 1], range[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace foro
