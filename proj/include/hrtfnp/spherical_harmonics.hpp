#pragma once

// Spherical-harmonic analysis/synthesis on an equiangular grid and zonal
// filtering. Colatitude theta is measured from +z, longitude phi from +x
// toward +y, so the median-plane reflection is phi -> -phi.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "hrtfnp/sphere_geom.hpp"

namespace hrtfnp::sh {

using Complex = std::complex<double>;

/// Index of (l, m) in a packed coefficient vector: l^2 + l + m.
constexpr std::size_t coeff_index(int l, int m) {
  return static_cast<std::size_t>(l * l + l + m);
}
constexpr std::size_t coeff_count(int bandwidth) {
  return static_cast<std::size_t>((bandwidth + 1) * (bandwidth + 1));
}

/// G x G grid: colatitudes theta_j = pi (j + 1/2) / G, longitudes
/// phi_k = 2 pi k / G, row-major [j][k]. Quadrature weights follow Fejer's
/// first rule in cos(theta), exact for band limits L <= G/2 - 1.
class EquiangularGrid {
 public:
  /// Throws ArgumentError unless size is even and >= 2.
  explicit EquiangularGrid(std::size_t size);

  std::size_t size() const noexcept { return size_; }
  std::size_t node_count() const noexcept { return size_ * size_; }
  int max_bandwidth() const noexcept { return static_cast<int>(size_ / 2) - 1; }

  double theta(std::size_t j) const { return theta_[j]; }
  double phi(std::size_t k) const { return phi_[k]; }
  /// Area weight of every node in ring j (the rule's weight times 2 pi / G).
  double weight(std::size_t j) const { return weight_[j]; }
  const std::vector<UnitVec3>& nodes() const noexcept { return nodes_; }

  /// Node index of the median-plane reflection of node (j, k): (j, G-k mod G).
  std::size_t reflected(std::size_t node) const;

 private:
  std::size_t size_;
  std::vector<double> theta_, phi_, weight_;
  std::vector<UnitVec3> nodes_;
};

/// Complex coefficients f_l^m, 0 <= l <= L, |m| <= l, orthonormal basis with
/// the Condon-Shortley phase.
struct ShCoeffs {
  int bandwidth = 0;
  std::vector<Complex> values;

  ShCoeffs() = default;
  explicit ShCoeffs(int L) : bandwidth(L), values(coeff_count(L)) {}

  Complex& operator()(int l, int m) { return values[coeff_index(l, m)]; }
  const Complex& operator()(int l, int m) const { return values[coeff_index(l, m)]; }
};

/// Per-degree real filter coefficients k_l, l = 0..L.
struct ZonalFilter {
  std::vector<double> k;
  int bandwidth() const { return static_cast<int>(k.size()) - 1; }
};

/// Legendre polynomial P_l(t) by the three-term recurrence.
/// Throws DomainError unless t in [-1, 1].
double legendre_poly(int l, double t);

/// Orthonormalized associated Legendre values Pbar_l^m(cos theta) for
/// 0 <= m <= l <= L, packed by coeff_index(l, m); Y_l^m = Pbar_l^m e^{i m phi}.
std::vector<double> normalized_legendre(int L, double cos_theta, double sin_theta);

/// Y_l^m at a unit vector.
Complex spherical_harmonic(int l, int m, const UnitVec3& x);

/// Analysis of a complex field sampled on the grid. Throws BandwidthError
/// when L > G/2 - 1 and ArgumentError on a size mismatch.
ShCoeffs forward_sht(std::span<const Complex> field, const EquiangularGrid& grid, int L);
ShCoeffs forward_sht(std::span<const double> field, const EquiangularGrid& grid, int L);

/// Synthesis on the grid nodes.
std::vector<Complex> inverse_sht(const ShCoeffs& coeffs, const EquiangularGrid& grid);

/// Synthesis at an arbitrary point.
Complex synthesize_at(const ShCoeffs& coeffs, const UnitVec3& x);

/// (f * k)_l^m = sqrt(4 pi / (2l + 1)) k_l f_l^m. Throws BandwidthError on
/// mismatched bandwidths.
ShCoeffs zonal_convolve(const ShCoeffs& f, const ZonalFilter& k);

/// Degrees at which `anchor_count` anchors sit: round(i L / (A - 1)).
std::vector<int> anchor_degrees(std::size_t anchor_count, int L);

/// (L+1) x A row-major matrix mapping anchor values to k_l by piecewise-linear
/// interpolation between anchor degrees.
std::vector<double> zonal_interpolation_matrix(std::size_t anchor_count, int L);

/// k_l from anchor values. Throws ArgumentError when fewer than 2 anchors.
ZonalFilter interpolate_zonal_filter(std::span<const double> anchors, int L);

/// Real orthonormal basis as dense matrices for use inside the model:
/// index (l, m) holds sqrt(2) Pbar_l^m cos(m phi) for m > 0, Pbar_l^0 for
/// m = 0 and sqrt(2) Pbar_l^|m| sin(|m| phi) for m < 0.
class RealShBasis {
 public:
  RealShBasis(const EquiangularGrid& grid, int L);

  int bandwidth() const noexcept { return bandwidth_; }
  std::size_t coeff_count() const noexcept { return ncoef_; }
  std::size_t node_count() const noexcept { return nodes_; }

  /// coeff_count x node_count, quadrature weights included.
  const std::vector<double>& analysis() const noexcept { return analysis_; }
  /// node_count x coeff_count.
  const std::vector<double>& synthesis() const noexcept { return synthesis_; }
  /// Degree l of each packed coefficient.
  const std::vector<std::size_t>& degree_of() const noexcept { return degree_of_; }

 private:
  int bandwidth_;
  std::size_t ncoef_, nodes_;
  std::vector<double> analysis_, synthesis_;
  std::vector<std::size_t> degree_of_;
};

/// Real-basis value of index (l, m) at a point (same convention as RealShBasis).
double real_spherical_harmonic(int l, int m, const UnitVec3& x);

}  // namespace hrtfnp::sh
