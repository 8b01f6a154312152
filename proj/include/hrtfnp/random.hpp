#pragma once

#include <cstdint>
#include <random>

namespace hrtfnp {

/// Seeded pseudo-random stream. The engine is mt19937_64 and every derived
/// distribution is implemented here, so sequences do not depend on the
/// standard library's distribution algorithms.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for one (seed, stream, step) triple.
  static RandomStream derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t step);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal deviate (Box-Muller, one value per call).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace hrtfnp
