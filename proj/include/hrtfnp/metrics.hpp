#pragma once

// Accuracy and calibration metrics in dB.

#include <cstddef>
#include <optional>
#include <vector>

#include "hrtfnp/prediction.hpp"

namespace hrtfnp::metrics {

/// Reported for an exact match, where the log ratio diverges.
constexpr double kLreFloorDb = -300.0;

/// 20 log10 |(est - truth) / truth|, floored at kLreFloorDb; nullopt when
/// truth is zero.
std::optional<double> lre(Complex est, Complex truth);

/// |20 log10 |est / truth||; nullopt when either magnitude is zero.
std::optional<double> lmd(Complex est, Complex truth);

struct LsdResult {
  std::optional<double> db;  // nullopt when an ear has no usable bin
  std::size_t excluded = 0;  // bins skipped for a zero magnitude
};

/// Mean over ears of the RMS over bins of 20 log10 |est / truth|. Both vectors
/// are laid out [ear * F + f].
LsdResult lsd(const std::vector<Complex>& truth, const std::vector<Complex>& est);

struct CalibrationPair {
  double variance = 0.0;
  double squared_error = 0.0;
};

struct CalibrationRow {
  double mpv = 0.0;
  double mse = 0.0;
  std::size_t count = 0;
};

/// Sorts by predicted variance (stable) and splits into D contiguous groups
/// whose sizes differ by at most one, the first (n mod D) groups taking the
/// extra pair. Throws ArgumentError when D == 0, D exceeds the pair count or
/// a pair is negative or non-finite.
std::vector<CalibrationRow> calibration_curve(std::vector<CalibrationPair> pairs, std::size_t divisions);

/// (1/D) sum |10 log10 (MSE_i / MPV_i)|. Throws DomainError on a
/// non-positive MPV and ArgumentError on an empty curve.
double mcd(const std::vector<CalibrationRow>& curve);

/// One pair per real component (Re and Im separately) of every feature.
void append_calibration_pairs(const std::vector<Complex>& truth, const Prediction& pred,
                              std::vector<CalibrationPair>& out);

}  // namespace hrtfnp::metrics
