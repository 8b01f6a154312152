#pragma once

// Random inputs shared by the unit and acceptance tests.

#include <cmath>
#include <vector>

#include "hrtfnp/model.hpp"
#include "hrtfnp/random.hpp"
#include "hrtfnp/sphere_geom.hpp"
#include "hrtfnp/spherical_harmonics.hpp"
#include "hrtfnp/task.hpp"

namespace fixture {

using hrtfnp::Complex;

/// Coefficients of a real band-limited field (f_l^-m = (-1)^m conj f_l^m).
inline hrtfnp::sh::ShCoeffs random_real_field_coeffs(int L, hrtfnp::RandomStream& rng) {
  hrtfnp::sh::ShCoeffs f(L);
  for (int l = 0; l <= L; ++l) {
    f(l, 0) = rng.normal();
    for (int m = 1; m <= l; ++m) {
      f(l, m) = Complex(rng.normal(), rng.normal());
      f(l, -m) = ((m % 2) ? -1.0 : 1.0) * std::conj(f(l, m));
    }
  }
  return f;
}

inline hrtfnp::DataPoint random_point(std::size_t bins, std::size_t index, hrtfnp::RandomStream& rng) {
  hrtfnp::DataPoint d;
  d.location = hrtfnp::random_unit(rng);
  d.index = index;
  for (std::size_t k = 0; k < 2 * bins; ++k) d.features.emplace_back(rng.normal(), rng.normal());
  return d;
}

inline hrtfnp::Task random_task(std::size_t bins, std::size_t context, std::size_t targets,
                                hrtfnp::RandomStream& rng) {
  hrtfnp::Task t;
  t.bins = bins;
  for (std::size_t i = 0; i < context; ++i) t.context.push_back(random_point(bins, i, rng));
  for (std::size_t i = 0; i < targets; ++i) t.target.push_back(random_point(bins, context + i, rng));
  t.requested_context = context;
  return t;
}

/// Replaces every parameter with random values: weights ~ N(0, 1/fan),
/// biases ~ N(0, 0.1^2), log-precisions around the initial value.
inline void randomize_params(hrtfnp::model::SConvCnp& m, hrtfnp::RandomStream& rng) {
  for (auto& [name, t] : m.params()) {
    auto& v = t.mutable_values();
    const bool is_beta = name.rfind("log_beta", 0) == 0;
    const bool is_bias = name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    const double base = is_beta ? v[0] : 0.0;
    const double sd = is_beta ? 0.3 : is_bias ? 0.1 : 1.0 / std::sqrt(static_cast<double>(t.shape()[0] + 1));
    for (auto& x : v) x = base + sd * rng.normal();
  }
}

}  // namespace fixture
