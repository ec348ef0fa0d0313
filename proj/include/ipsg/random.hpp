#ifndef IPSG_RANDOM_HPP
#define IPSG_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace ipsg {

/// Seeded generator with platform-stable derived distributions.
///
/// std::mt19937_64 output is fixed by the standard, but the standard
/// distributions are not, so uniform, bounded-integer and Gaussian draws
/// are implemented here (53-bit mantissa fill, rejection sampling and the
/// Marsaglia polar method respectively).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal draw.
  double gaussian();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 mix of (seed, stream); used to give independent substreams
/// (initial point, batches, delays, ...) to one user-facing seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// In-place Fisher-Yates shuffle.
void shuffle(std::span<std::size_t> items, Rng& rng);

namespace streams {
inline constexpr std::uint64_t kInstance = 1;
inline constexpr std::uint64_t kInitialPoint = 2;
inline constexpr std::uint64_t kBatches = 3;
inline constexpr std::uint64_t kDelays = 4;
inline constexpr std::uint64_t kOutputIndex = 5;
}  // namespace streams

}  // namespace ipsg

#endif  // IPSG_RANDOM_HPP
