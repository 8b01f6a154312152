#pragma once

// Property measurements on the model, shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "hrtfnp/model.hpp"
#include "hrtfnp/random.hpp"
#include "hrtfnp/spherical_harmonics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace checks {

using hrtfnp::Complex;
using hrtfnp::Prediction;
using hrtfnp::Task;
using hrtfnp::model::SConvCnp;

/// max |a - b| / max |b| over all means and scales of all targets.
inline double prediction_gap(const std::vector<Prediction>& a, const std::vector<Prediction>& b) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].mean.size(); ++i) {
      diff = std::max({diff, std::abs(a[t].mean[i] - b[t].mean[i]), std::abs(a[t].stddev[i] - b[t].stddev[i])});
      ref = std::max({ref, std::abs(b[t].mean[i]), std::abs(b[t].stddev[i])});
    }
  return ref > 0.0 ? diff / ref : diff;
}

/// Relative gap between forward(mirror_task(t)) and the ear-swapped forward(t).
inline double reflection_gap(const SConvCnp& model, const Task& task) {
  const Task mirrored = hrtfnp::mirror_task(task);
  const auto direct = model.predict(task.context, hrtfnp::model::target_locations(task));
  const auto flipped = model.predict(mirrored.context, hrtfnp::model::target_locations(mirrored));
  std::vector<Prediction> swapped;
  for (const auto& p : direct) swapped.push_back(hrtfnp::model::swap_ears(p, task.bins));
  return prediction_gap(flipped, swapped);
}

struct GradientCheck {
  std::size_t probed = 0;
  std::size_t failed = 0;
  double worst = 0.0;  // worst |analytic - numeric| / max(|analytic|, |numeric|)
};

/// Central differences on `probes` randomly chosen scalar parameters. A probe
/// passes when |a - n| <= tol * max(|a|, |n|) + abs_floor.
inline GradientCheck gradient_check(SConvCnp& model, const Task& task, std::size_t probes, double tol,
                                    hrtfnp::RandomStream& rng, double h = 1e-6, double abs_floor = 1e-8) {
  for (auto& [name, t] : model.params()) t.zero_grad();
  hrtfnp::ag::backward(model.loss(task));
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t p = 0; p < model.params().size(); ++p)
    for (std::size_t i = 0; i < model.params()[p].second.numel(); ++i) all.emplace_back(p, i);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) std::swap(all[i], all[i + rng.uniform_int(all.size() - i)]);
  GradientCheck out;
  for (std::size_t k = 0; k < std::min(probes, all.size()); ++k) {
    auto& t = model.params()[all[k].first].second;
    const std::size_t i = all[k].second;
    const double analytic = t.grad()[i];
    const double x0 = t.values()[i];
    double fp, fm;
    {
      hrtfnp::ag::NoGradGuard ng;
      t.mutable_values()[i] = x0 + h;
      fp = model.loss(task).item();
      t.mutable_values()[i] = x0 - h;
      fm = model.loss(task).item();
    }
    t.mutable_values()[i] = x0;
    const double numeric = (fp - fm) / (2.0 * h);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    const double err = std::abs(analytic - numeric);
    ++out.probed;
    if (err > tol * scale + abs_floor) ++out.failed;
    if (scale > 0.0) out.worst = std::max(out.worst, err / scale);
  }
  return out;
}

/// Relative equivariance error of one zonal convolution: rotating a random
/// real band-limited field before filtering versus rotating the filtered
/// coefficients, rotations applied through Wigner-D matrices.
inline double zonal_rotation_gap(int L, hrtfnp::RandomStream& rng) {
  const auto f = fixture::random_real_field_coeffs(L, rng);
  hrtfnp::sh::ZonalFilter k;
  for (int l = 0; l <= L; ++l) k.k.push_back(rng.normal());
  const auto R = hrtfnp::random_rotation(rng);
  const auto a = hrtfnp::sh::zonal_convolve(oracle::rotate_coeffs(f, R), k);
  const auto b = oracle::rotate_coeffs(hrtfnp::sh::zonal_convolve(f, k), R);
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
    ref = std::max(ref, std::abs(b.values[i]));
  }
  return diff / ref;
}

}  // namespace checks
