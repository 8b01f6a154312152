#include "hrtfnp/hrtf_signal.hpp"

#include <cmath>
#include <numbers>

#include "hrtfnp/errors.hpp"
#include "hrtfnp/fft.hpp"

namespace hrtfnp::signal {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kUp = 3;
constexpr std::size_t kDown = 4;
constexpr std::size_t kTapsPerPhase = 32;
constexpr double kKaiserBeta = 8.0;
constexpr std::size_t kMinPhasePad = 8;
constexpr std::size_t kGroupDelayPad = 4;

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double y = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= y / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

HalfSpectrum apply_phase(const HalfSpectrum& s, const PureDelay& d, double sign) {
  HalfSpectrum out = s;
  const double n_taps = static_cast<double>(s.taps);
  for (std::size_t e = 0; e < 2; ++e) {
    for (std::size_t n = 0; n < s.ears[e].size(); ++n) {
      const double angle = sign * 2.0 * kPi * static_cast<double>(n) * d[e] / n_taps;
      out.ears[e][n] = s.ears[e][n] * std::polar(1.0, angle);
    }
  }
  return out;
}

}  // namespace

std::vector<double> resampler_prototype() {
  // One extra tap makes the length odd so the group delay is an integer
  // number of upsampled samples.
  const std::size_t len = kUp * kTapsPerPhase + 1;
  const double center = static_cast<double>(len - 1) / 2.0;
  const double cutoff = 0.5 / static_cast<double>(kDown);  // cycles/sample at the upsampled rate
  std::vector<double> h(len);
  const double i0b = bessel_i0(kKaiserBeta);
  for (std::size_t k = 0; k < len; ++k) {
    const double t = static_cast<double>(k) - center;
    const double x = 2.0 * kPi * cutoff * t;
    const double sinc = t == 0.0 ? 1.0 : std::sin(x) / x;
    const double r = t / center;
    const double w = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    h[k] = 2.0 * cutoff * sinc * w;
  }
  return h;
}

Hrir resample_3_4(const Hrir& h) {
  if (h.fs != 44100.0) throw ArgumentError("resample_3_4 expects fs = 44100 Hz");
  const std::size_t n = h.taps();
  if (n % kDown != 0 || n == 0) throw ArgumentError("tap count must be a positive multiple of 4");
  const auto proto = resampler_prototype();
  const std::size_t len = proto.size();
  const std::size_t delay = (len - 1) / 2;

  // Per-phase normalization: the taps that meet non-zero upsampled samples
  // for a given output phase sum to one, so constants pass unchanged.
  std::array<double, kUp> phase_gain{};
  for (std::size_t k = 0; k < len; ++k) phase_gain[k % kUp] += proto[k];

  Hrir out;
  out.fs = h.fs * static_cast<double>(kUp) / static_cast<double>(kDown);
  const std::size_t n_out = n * kUp / kDown;
  for (std::size_t e = 0; e < 2; ++e) {
    out.ears[e].assign(n_out, 0.0);
    for (std::size_t m = 0; m < n_out; ++m) {
      // Upsampled index u = kDown * m + delay - k must be a multiple of kUp.
      const std::size_t base = kDown * m + delay;
      double acc = 0.0;
      for (std::size_t k = base % kUp; k < len; k += kUp) {
        if (k > base) break;
        const std::size_t src = (base - k) / kUp;
        if (src < n) acc += proto[k] * h.ears[e][src];
      }
      out.ears[e][m] = acc / phase_gain[base % kUp];
    }
  }
  return out;
}

HalfSpectrum half_spectrum(const Hrir& h) {
  HalfSpectrum s;
  s.fs = h.fs;
  s.taps = h.taps();
  for (std::size_t e = 0; e < 2; ++e) s.ears[e] = fft::real_forward(h.ears[e], s.taps);
  return s;
}

Hrir impulse_from_half(const HalfSpectrum& s) {
  Hrir h;
  h.fs = s.fs;
  for (std::size_t e = 0; e < 2; ++e) h.ears[e] = fft::real_inverse(s.ears[e], s.taps);
  return h;
}

std::vector<Complex> minimum_phase_spectrum(const std::vector<double>& taps, std::size_t n) {
  std::vector<Complex> padded(n, Complex{});
  for (std::size_t i = 0; i < std::min(n, taps.size()); ++i) padded[i] = taps[i];
  const auto spec = fft::forward(padded);
  std::vector<Complex> log_mag(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double mag = std::abs(spec[k]);
    if (!(mag > 0.0)) throw DegenerateSpectrumError("spectrum has an exactly-zero magnitude bin");
    log_mag[k] = std::log(mag);
  }
  auto cep = fft::inverse(log_mag);
  // Fold the real cepstrum onto its causal part.
  std::vector<Complex> folded(n, Complex{});
  folded[0] = cep[0].real();
  for (std::size_t i = 1; i < (n + 1) / 2; ++i) folded[i] = 2.0 * cep[i].real();
  if (n % 2 == 0) folded[n / 2] = cep[n / 2].real();
  auto out = fft::forward(folded);
  for (auto& v : out) v = std::exp(v);
  return out;
}

std::array<std::vector<double>, 2> excess_group_delay(const HalfSpectrum& s) {
  const std::size_t N = s.taps;
  const std::size_t n_gd = kGroupDelayPad * N;
  const std::size_t n_mp = kMinPhasePad * N;
  const double dw = 2.0 * kPi / static_cast<double>(n_gd);
  std::array<std::vector<double>, 2> out;
  for (std::size_t e = 0; e < 2; ++e) {
    for (const auto& v : s.ears[e])
      if (v == Complex{}) throw DegenerateSpectrumError("spectrum has an exactly-zero magnitude bin");
    const auto taps = fft::real_inverse(s.ears[e], N);
    std::vector<Complex> padded(n_gd, Complex{});
    for (std::size_t i = 0; i < N; ++i) padded[i] = taps[i];
    const auto spec = fft::forward(padded);
    const auto minp = minimum_phase_spectrum(taps, n_mp);
    const std::size_t ratio = n_mp / n_gd;
    // Excess-phase factor on the group-delay grid; its magnitude is ~1.
    auto excess = [&](std::size_t k) {
      const std::size_t kk = k % n_gd;
      const Complex h = spec[kk];
      if (!(std::abs(h) > 0.0)) throw DegenerateSpectrumError("spectrum has an exactly-zero magnitude bin");
      return h / minp[kk * ratio];
    };
    out[e].resize(s.bins());
    for (std::size_t b = 0; b < s.bins(); ++b) {
      const std::size_t k = kGroupDelayPad * b;
      const std::size_t prev = (k + n_gd - 1) % n_gd;
      // Phase increments in (-pi, pi] unwrap with tolerance pi.
      const double d_fwd = std::arg(excess(k + 1) * std::conj(excess(k)));
      const double d_back = std::arg(excess(k) * std::conj(excess(prev)));
      out[e][b] = -(d_fwd + d_back) / (2.0 * dw);
    }
  }
  return out;
}

PureDelay estimate_pure_delay(const Hrir& h) {
  const auto s = half_spectrum(h);
  const double bin_hz = h.fs / static_cast<double>(s.taps);
  std::size_t in_band = 0;
  while (in_band < s.bins() && static_cast<double>(in_band) * bin_hz <= kDelayBandHz) ++in_band;
  if (in_band < 2) throw ArgumentError("fewer than two frequency bins below 1.1 kHz");
  const auto egd = excess_group_delay(s);
  double tau[2];
  for (std::size_t e = 0; e < 2; ++e) {
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < in_band; ++b) {
      const double p = std::norm(s.ears[e][b]);
      num += p * egd[e][b];
      den += p;
    }
    if (!(den > 0.0)) throw DegenerateSpectrumError("no energy below 1.1 kHz");
    tau[e] = std::max(0.0, num / den);
  }
  return {tau[0], tau[1]};
}

HalfSpectrum time_align(const HalfSpectrum& s, const PureDelay& d) { return apply_phase(s, d, +1.0); }

HalfSpectrum realign(const HalfSpectrum& m, const PureDelay& d) { return apply_phase(m, d, -1.0); }

}  // namespace hrtfnp::signal
