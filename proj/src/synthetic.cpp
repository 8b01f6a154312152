#include "hrtfnp/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "hrtfnp/errors.hpp"
#include "hrtfnp/random.hpp"
#include "hrtfnp/spherical_harmonics.hpp"

namespace hrtfnp::synth {

namespace {
constexpr std::uint64_t kSynthStream = 0x5e7a;
}

double prior_variance(int max_degree) {
  // Addition theorem: sum_m Y_l^m(x)^2 = (2l + 1) / (4 pi) in the real basis.
  double v = 0.0;
  for (int l = 0; l <= max_degree; ++l) v += (2.0 * l + 1.0) / (4.0 * std::numbers::pi * (1.0 + l) * (1.0 + l));
  return v;
}

std::string subject_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth%03zu", index);
  return buf;
}

AlignedSet generate_subject(const SyntheticConfig& cfg, std::size_t index) {
  if (cfg.positions < 4 || cfg.bins < 2 || cfg.max_degree < 0) throw ArgumentError("synthetic config out of range");
  if (!(std::abs(cfg.bin_correlation) < 1.0) || !(cfg.ear_noise >= 0.0))
    throw ArgumentError("synthetic config: correlation must lie in (-1, 1) and noise must be nonnegative");
  RandomStream rng = RandomStream::derive(cfg.seed, kSynthStream, index);
  const int L = cfg.max_degree;
  const std::size_t F = cfg.bins, ncoef = sh::coeff_count(L);

  // coeffs[(f * 2 + part) * ncoef + k], AR(1) across bins.
  std::vector<double> coeffs(F * 2 * ncoef);
  const double rho = cfg.bin_correlation, innov = std::sqrt(1.0 - rho * rho);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t part = 0; part < 2; ++part)
      for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m) {
          const std::size_t k = sh::coeff_index(l, m);
          const double sd = 1.0 / (1.0 + l);
          const double z = rng.normal();
          double& c = coeffs[(f * 2 + part) * ncoef + k];
          c = f == 0 ? sd * z : rho * coeffs[((f - 1) * 2 + part) * ncoef + k] + innov * sd * z;
        }

  AlignedSet s;
  s.subject_id = subject_name(index);
  s.fs = cfg.fs;
  s.taps = 2 * (F - 1);
  s.positions = approx_uniform_grid(cfg.positions);
  s.delays.assign(cfg.positions, PureDelay{});
  s.spectra.assign(cfg.positions * 2 * F, Complex{});
  const double noise = cfg.ear_noise * std::sqrt(prior_variance(L));
  std::vector<double> y(ncoef);
  for (std::size_t p = 0; p < cfg.positions; ++p)
    for (std::size_t e = 0; e < 2; ++e) {
      const UnitVec3 x = e == 0 ? s.positions[p] : mirror_median(s.positions[p]);
      for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m) y[sh::coeff_index(l, m)] = sh::real_spherical_harmonic(l, m, x);
      for (std::size_t f = 0; f < F; ++f) {
        double part[2] = {0.0, 0.0};
        for (std::size_t q = 0; q < 2; ++q)
          for (std::size_t k = 0; k < ncoef; ++k) part[q] += coeffs[(f * 2 + q) * ncoef + k] * y[k];
        if (e == 1) {
          part[0] += noise * rng.normal();
          part[1] += noise * rng.normal();
        }
        s.at(p, e, f) = {part[0], part[1]};
      }
    }
  return s;
}

}  // namespace hrtfnp::synth
