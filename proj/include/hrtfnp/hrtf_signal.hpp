#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace hrtfnp {

using Complex = std::complex<double>;

enum Ear : std::size_t { kLeft = 0, kRight = 1 };

/// Binaural impulse response: N taps per ear at sample rate fs.
struct Hrir {
  double fs = 0.0;
  std::array<std::vector<double>, 2> ears;

  std::size_t taps() const { return ears[0].size(); }
};

/// DFT bins 0..N/2 of both ears, with the original tap count N.
struct HalfSpectrum {
  double fs = 0.0;
  std::size_t taps = 0;
  std::array<std::vector<Complex>, 2> ears;

  std::size_t bins() const { return taps / 2 + 1; }
};

/// Pure delay of each ear, in samples.
struct PureDelay {
  double left = 0.0;
  double right = 0.0;

  double operator[](std::size_t ear) const { return ear == kLeft ? left : right; }
};

namespace signal {

/// Upper edge of the band used by the pure-delay estimate, Hz.
inline constexpr double kDelayBandHz = 1100.0;

/// 44.1 kHz -> 33.075 kHz (up 3, Kaiser-windowed sinc low-pass, down 4).
/// N taps become 3N/4. Throws ArgumentError when fs != 44100 or N % 4 != 0.
Hrir resample_3_4(const Hrir& h);

/// Prototype low-pass of the 3/4 resampler at the upsampled rate
/// (odd length, linear phase, beta 8, cutoff at the output Nyquist).
std::vector<double> resampler_prototype();

/// DFT bins 0..N/2 of each ear.
HalfSpectrum half_spectrum(const Hrir& h);

/// Real impulse response from a half spectrum (Hermitian extension).
Hrir impulse_from_half(const HalfSpectrum& s);

/// Group delay minus the group delay of the minimum-phase counterpart, in
/// samples, per ear and per bin 0..N/2. Throws DegenerateSpectrumError when
/// any magnitude bin is exactly zero.
std::array<std::vector<double>, 2> excess_group_delay(const HalfSpectrum& s);

/// Minimum-phase spectrum of a real impulse response on an n-point DFT grid
/// (real-cepstrum folding). Returns all n bins.
std::vector<Complex> minimum_phase_spectrum(const std::vector<double>& taps, std::size_t n);

/// Power-weighted mean excess group delay over bins at or below 1.1 kHz.
/// Negative estimates are clamped to 0. Throws ArgumentError when fewer than
/// two bins fall in the band.
PureDelay estimate_pure_delay(const Hrir& h);

/// m_n = e^{+i 2 pi n tau / N} h_n: removes a delay of tau samples.
HalfSpectrum time_align(const HalfSpectrum& s, const PureDelay& d);

/// h_n = e^{-i 2 pi n tau / N} m_n: inverse of time_align.
HalfSpectrum realign(const HalfSpectrum& m, const PureDelay& d);

}  // namespace signal
}  // namespace hrtfnp
