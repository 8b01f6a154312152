#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hrtfnp/errors.hpp"
#include "hrtfnp/fft.hpp"
#include "hrtfnp/hrtf_signal.hpp"
#include "hrtfnp/random.hpp"
#include "support/oracles.hpp"

using namespace hrtfnp;
using namespace hrtfnp::signal;

namespace {
constexpr double kPi = std::numbers::pi;

Hrir delta_pair(std::size_t n, std::size_t dl, std::size_t dr, double fs = 33075.0) {
  Hrir h;
  h.fs = fs;
  h.ears[0].assign(n, 0.0);
  h.ears[1].assign(n, 0.0);
  h.ears[0][dl] = 1.0;
  h.ears[1][dr] = 1.0;
  return h;
}

// Minimum-phase filter built as a product of first-order sections with
// zeros inside the unit circle.
std::vector<double> min_phase_filter(std::size_t n) {
  std::vector<double> h{1.0};
  for (double z : {0.5, -0.3, 0.7}) {
    std::vector<double> next(h.size() + 1, 0.0);
    for (std::size_t i = 0; i < h.size(); ++i) {
      next[i] += h[i];
      next[i + 1] -= z * h[i];
    }
    h = next;
  }
  h.resize(n, 0.0);
  return h;
}

Hrir shifted(const std::vector<double>& base, std::size_t d, double fs = 33075.0) {
  Hrir h;
  h.fs = fs;
  for (auto& e : h.ears) {
    e.assign(base.size(), 0.0);
    for (std::size_t i = 0; i + d < base.size(); ++i) e[i + d] = base[i];
  }
  return h;
}
}  // namespace

TEST_CASE("half_spectrum") {
  auto s = half_spectrum(delta_pair(8, 0, 1));
  REQUIRE(s.bins() == 5);
  for (std::size_t n = 0; n < 5; ++n) {
    CHECK(std::abs(s.ears[0][n] - Complex(1, 0)) < 1e-15);
    CHECK(std::abs(s.ears[1][n] - std::polar(1.0, -2 * kPi * n / 8)) < 1e-15);
  }
  RandomStream rng(1);
  Hrir h;
  h.fs = 44100;
  for (auto& e : h.ears)
    for (int i = 0; i < 64; ++i) e.push_back(rng.normal());
  s = half_spectrum(h);
  std::vector<Complex> x(h.ears[1].begin(), h.ears[1].end());
  const auto ref = oracle::dft(x);
  for (std::size_t n = 0; n < s.bins(); ++n) CHECK(std::abs(s.ears[1][n] - ref[n]) < 1e-11);
  CHECK(std::abs(s.ears[0][0].imag()) < 1e-9);
  CHECK(std::abs(s.ears[0][32].imag()) < 1e-9);
  const auto back = impulse_from_half(s);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(back.ears[e][i] - h.ears[e][i]) < 1e-12);
}

TEST_CASE("excess_group_delay") {
  auto egd = excess_group_delay(half_spectrum(delta_pair(192, 20, 20)));
  for (const auto& ear : egd)
    for (double v : ear) CHECK(std::abs(v - 20.0) < 1e-6);

  const auto mp = min_phase_filter(192);
  egd = excess_group_delay(half_spectrum(shifted(mp, 0)));
  for (double v : egd[0]) CHECK(std::abs(v) < 1e-3);

  egd = excess_group_delay(half_spectrum(shifted(mp, 13)));
  for (double v : egd[1]) CHECK(std::abs(v - 13.0) < 1e-3);

  HalfSpectrum zero = half_spectrum(delta_pair(16, 0, 0));
  zero.ears[0][3] = 0.0;
  CHECK_THROWS_AS(excess_group_delay(zero), DegenerateSpectrumError);
}

TEST_CASE("estimate_pure_delay") {
  auto d = estimate_pure_delay(delta_pair(192, 20, 20));
  CHECK(std::abs(d.left - 20) < 1e-3);
  CHECK(std::abs(d.right - 20) < 1e-3);
  d = estimate_pure_delay(delta_pair(192, 5, 9));
  CHECK(std::abs(d.left - 5) < 1e-3);
  CHECK(std::abs(d.right - 9) < 1e-3);

  // Shift covariance with a dispersive filter.
  const auto mp = min_phase_filter(192);
  const auto d0 = estimate_pure_delay(shifted(mp, 0));
  CHECK(std::abs(d0.left) < 1e-2);
  for (std::size_t s : {3u, 17u, 40u}) {
    const auto ds = estimate_pure_delay(shifted(mp, s));
    CHECK(std::abs(ds.left - d0.left - s) < 1e-3);
  }

  // Aligned filters carry no residual delay.
  const auto h = shifted(mp, 25);
  const auto aligned = impulse_from_half(time_align(half_spectrum(h), estimate_pure_delay(h)));
  const auto da = estimate_pure_delay(aligned);
  CHECK(std::abs(da.left) < 1e-2);
  CHECK(std::abs(da.right) < 1e-2);

  CHECK_THROWS_AS(estimate_pure_delay(delta_pair(8, 0, 0, 44100)), ArgumentError);
}

TEST_CASE("time_align and realign") {
  RandomStream rng(3);
  const auto s = half_spectrum(delta_pair(192, 20, 20));
  const auto m = time_align(s, {20, 20});
  for (const auto& ear : m.ears)
    for (const auto& v : ear) CHECK(std::abs(v - Complex(1, 0)) < 1e-9);

  HalfSpectrum ones = m;
  for (auto& ear : ones.ears)
    for (auto& v : ear) v = 1.0;
  const auto h = realign(ones, {20, 20});
  for (std::size_t n = 0; n < h.bins(); ++n) CHECK(std::abs(h.ears[0][n] - s.ears[0][n]) < 1e-12);

  HalfSpectrum r;
  r.fs = 33075;
  r.taps = 64;
  for (auto& ear : r.ears)
    for (int i = 0; i < 33; ++i) ear.emplace_back(rng.normal(), rng.normal());
  const PureDelay d{rng.uniform(0, 30), rng.uniform(0, 30)};
  const auto a = time_align(r, d);
  const auto rr = realign(a, d);
  const auto id = time_align(r, {0, 0});
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t n = 0; n < 33; ++n) {
      CHECK(std::abs(rr.ears[e][n] - r.ears[e][n]) < 1e-12);
      CHECK(std::abs(std::abs(a.ears[e][n]) - std::abs(r.ears[e][n])) < 1e-12);
      CHECK(id.ears[e][n] == r.ears[e][n]);
    }
}

TEST_CASE("resample_3_4") {
  Hrir h;
  h.fs = 44100;
  h.ears[0].assign(256, 0.0);
  h.ears[1].assign(256, 0.0);
  auto out = resample_3_4(h);
  CHECK(out.taps() == 192);
  CHECK(out.fs == 33075.0);
  for (double v : out.ears[0]) CHECK(v == 0.0);

  h.ears[0].assign(256, 0.7);
  out = resample_3_4(h);
  // DC is preserved away from the zero-padded edges.
  for (std::size_t i = 20; i < 170; ++i) CHECK(std::abs(out.ears[0][i] - 0.7) < 1e-6 * 0.7);

  for (std::size_t i = 0; i < 256; ++i) h.ears[1][i] = std::sin(2 * kPi * 2000.0 * i / 44100.0 + 0.3);
  out = resample_3_4(h);
  for (std::size_t i = 20; i < 170; ++i)
    CHECK(std::abs(out.ears[1][i] - std::sin(2 * kPi * 2000.0 * i / 33075.0 + 0.3)) < 1e-4);
  double peak = 0;
  for (std::size_t i = 20; i < 170; ++i) peak = std::max(peak, std::abs(out.ears[1][i]));
  CHECK(std::abs(20 * std::log10(peak)) < 0.1);

  Hrir bad = h;
  bad.ears[0].resize(254);
  bad.ears[1].resize(254);
  CHECK_THROWS_AS(resample_3_4(bad), ArgumentError);
  bad = h;
  bad.fs = 48000;
  CHECK_THROWS_AS(resample_3_4(bad), ArgumentError);
}
