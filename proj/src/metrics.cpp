#include "hrtfnp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hrtfnp/errors.hpp"

namespace hrtfnp::metrics {

std::optional<double> lre(Complex est, Complex truth) {
  if (std::abs(truth) == 0.0) return std::nullopt;
  const double r = std::abs((est - truth) / truth);
  if (r == 0.0) return kLreFloorDb;
  return std::max(kLreFloorDb, 20.0 * std::log10(r));
}

std::optional<double> lmd(Complex est, Complex truth) {
  if (std::abs(truth) == 0.0 || std::abs(est) == 0.0) return std::nullopt;
  return std::abs(20.0 * std::log10(std::abs(est) / std::abs(truth)));
}

LsdResult lsd(const std::vector<Complex>& truth, const std::vector<Complex>& est) {
  if (truth.size() != est.size() || truth.size() % 2 != 0 || truth.empty())
    throw ArgumentError("lsd: spectra must have equal, even, nonzero length");
  const std::size_t F = truth.size() / 2;
  LsdResult r;
  double total = 0.0;
  bool complete = true;
  for (std::size_t e = 0; e < 2; ++e) {
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < F; ++f) {
      const auto d = lmd(est[e * F + f], truth[e * F + f]);
      if (!d) {
        ++r.excluded;
        continue;
      }
      acc += *d * *d;
      ++used;
    }
    if (used == 0) complete = false;
    else total += std::sqrt(acc / static_cast<double>(used));
  }
  if (complete) r.db = total / 2.0;
  return r;
}

std::vector<CalibrationRow> calibration_curve(std::vector<CalibrationPair> pairs, std::size_t divisions) {
  if (divisions == 0) throw ArgumentError("calibration curve needs at least one division");
  if (pairs.size() < divisions)
    throw ArgumentError("calibration curve: " + std::to_string(pairs.size()) + " pairs for " +
                        std::to_string(divisions) + " divisions");
  for (const auto& p : pairs)
    if (!(p.variance >= 0.0) || !(p.squared_error >= 0.0) || !std::isfinite(p.variance) ||
        !std::isfinite(p.squared_error))
      throw ArgumentError("calibration pairs must be finite and nonnegative");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const CalibrationPair& a, const CalibrationPair& b) { return a.variance < b.variance; });
  const std::size_t base = pairs.size() / divisions, extra = pairs.size() % divisions;
  std::vector<CalibrationRow> rows(divisions);
  std::size_t start = 0;
  for (std::size_t d = 0; d < divisions; ++d) {
    const std::size_t n = base + (d < extra ? 1 : 0);
    double v = 0.0, e = 0.0;
    for (std::size_t i = start; i < start + n; ++i) {
      v += pairs[i].variance;
      e += pairs[i].squared_error;
    }
    rows[d] = {v / static_cast<double>(n), e / static_cast<double>(n), n};
    start += n;
  }
  return rows;
}

double mcd(const std::vector<CalibrationRow>& curve) {
  if (curve.empty()) throw ArgumentError("mcd of an empty calibration curve");
  double acc = 0.0;
  for (const auto& r : curve) {
    if (!(r.mpv > 0.0)) throw DomainError("mcd: mean predicted variance must be positive");
    acc += std::abs(10.0 * std::log10(r.mse / r.mpv));
  }
  return acc / static_cast<double>(curve.size());
}

void append_calibration_pairs(const std::vector<Complex>& truth, const Prediction& pred,
                              std::vector<CalibrationPair>& out) {
  if (pred.stddev.size() != truth.size() || pred.mean.size() != truth.size())
    throw ArgumentError("calibration pairs need a predictive scale for every feature");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const Complex d = truth[i] - pred.mean[i];
    out.push_back({pred.stddev[i].real() * pred.stddev[i].real(), d.real() * d.real()});
    out.push_back({pred.stddev[i].imag() * pred.stddev[i].imag(), d.imag() * d.imag()});
  }
}

}  // namespace hrtfnp::metrics
