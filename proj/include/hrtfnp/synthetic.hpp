#pragma once

// Synthetic stand-in for measured HRTF sets: band-limited random fields on
// the sphere with correlated frequency bins and near-mirrored ears.

#include <cstdint>
#include <string>
#include <vector>

#include "hrtfnp/dataset.hpp"

namespace hrtfnp::synth {

struct SyntheticConfig {
  std::size_t positions = 400;   // approximately uniform grid
  std::size_t bins = 5;          // F; taps = 2 (F - 1)
  int max_degree = 6;
  double bin_correlation = 0.8;  // AR(1) coefficient across bins
  double ear_noise = 0.1;        // right = mirrored left + this much relative noise
  double fs = 8000.0;
  std::uint64_t seed = 0;
};

/// Subject `index` ("synth###", numbering from 1). Real and imaginary parts
/// are independent fields sum_{l <= Lmax} a_l^m Y_l^m (real basis) with
/// a ~ N(0, (1 + l)^-2). The left ear is sampled at the positions; the right
/// ear reads the same field at the mirrored position plus white noise of
/// standard deviation ear_noise times the field's prior RMS.
AlignedSet generate_subject(const SyntheticConfig& cfg, std::size_t index);

/// Prior variance of one real component of the field.
double prior_variance(int max_degree);

/// Subject id of synthetic subject `index`.
std::string subject_name(std::size_t index);

}  // namespace hrtfnp::synth
