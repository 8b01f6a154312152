#include "hrtfnp/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace hrtfnp {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream RandomStream::derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ mix64(stream + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ mix64(step + 0x8cb92ba72f3d8dd7ULL));
  return RandomStream(h);
}

std::uint64_t RandomStream::uniform_int(std::uint64_t n) {
  // Rejection sampling on the top of the range keeps the result exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return r % n;
}

double RandomStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace hrtfnp
