#include "hrtfnp/spherical_harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hrtfnp/errors.hpp"

namespace hrtfnp::sh {
namespace {

constexpr double kPi = std::numbers::pi;

void check_bandwidth(int L, const EquiangularGrid& grid) {
  if (L < 0) throw BandwidthError("negative bandwidth");
  if (L > grid.max_bandwidth()) {
    throw BandwidthError("bandwidth " + std::to_string(L) + " exceeds G/2 - 1 = " +
                         std::to_string(grid.max_bandwidth()) + " for G = " + std::to_string(grid.size()));
  }
}

double colatitude_of(const UnitVec3& x, double& sin_theta) {
  sin_theta = std::hypot(x.x(), x.y());
  return x.z();
}

}  // namespace

EquiangularGrid::EquiangularGrid(std::size_t size) : size_(size) {
  if (size < 2 || size % 2 != 0) throw ArgumentError("equiangular grid size must be even and >= 2");
  const double g = static_cast<double>(size);
  theta_.resize(size);
  phi_.resize(size);
  weight_.resize(size);
  for (std::size_t j = 0; j < size; ++j) {
    theta_[j] = kPi * (static_cast<double>(j) + 0.5) / g;
    double s = 0;
    for (std::size_t k = 1; k <= size / 2; ++k) {
      const double kk = static_cast<double>(k);
      s += std::cos(2.0 * kk * theta_[j]) / (4.0 * kk * kk - 1.0);
    }
    weight_[j] = (2.0 / g) * (1.0 - 2.0 * s) * (2.0 * kPi / g);
  }
  for (std::size_t k = 0; k < size; ++k) phi_[k] = 2.0 * kPi * static_cast<double>(k) / g;

  // Nodes with k > G/2 are built as exact mirror images of nodes G - k, so the
  // reflection maps node coordinates bit-exactly.
  nodes_.resize(size * size);
  for (std::size_t j = 0; j < size; ++j) {
    const double st = std::sin(theta_[j]);
    const double ct = std::cos(theta_[j]);
    for (std::size_t k = 0; k <= size / 2; ++k) {
      // Nodes on the median plane get y = 0 exactly.
      const bool median = k == 0 || k == size / 2;
      const double x = k == 0 ? st : (k == size / 2 ? -st : st * std::cos(phi_[k]));
      const UnitVec3 v = UnitVec3::from_unit(x, median ? 0.0 : st * std::sin(phi_[k]), ct);
      nodes_[j * size + k] = v;
      if (k != 0 && k != size / 2) nodes_[j * size + (size - k)] = mirror_median(v);
    }
  }
}

std::size_t EquiangularGrid::reflected(std::size_t node) const {
  const std::size_t j = node / size_;
  const std::size_t k = node % size_;
  return j * size_ + (size_ - k) % size_;
}

double legendre_poly(int l, double t) {
  if (!(t >= -1.0 && t <= 1.0)) throw DomainError("legendre_poly argument outside [-1, 1]");
  if (l < 0) throw DomainError("negative Legendre degree");
  if (l == 0) return 1.0;
  double p0 = 1.0, p1 = t;
  for (int n = 2; n <= l; ++n) {
    const double p2 = ((2.0 * n - 1.0) * t * p1 - (n - 1.0) * p0) / n;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

std::vector<double> normalized_legendre(int L, double x, double s) {
  std::vector<double> p(coeff_count(L), 0.0);
  double pmm = std::sqrt(1.0 / (4.0 * kPi));
  for (int m = 0; m <= L; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    p[coeff_index(m, m)] = pmm;
    if (m == L) break;
    double prev = pmm;
    double cur = std::sqrt(2.0 * m + 3.0) * x * pmm;
    p[coeff_index(m + 1, m)] = cur;
    for (int l = m + 2; l <= L; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l * l - m * m)));
      const double a_prev =
          std::sqrt((4.0 * (l - 1) * (l - 1) - 1.0) / (static_cast<double>((l - 1) * (l - 1) - m * m)));
      const double next = a * (x * cur - prev / a_prev);
      prev = cur;
      cur = next;
      p[coeff_index(l, m)] = cur;
    }
  }
  return p;
}

Complex spherical_harmonic(int l, int m, const UnitVec3& x) {
  double s = 0;
  const double c = colatitude_of(x, s);
  const auto p = normalized_legendre(l, c, s);
  const int am = std::abs(m);
  const double phi = std::atan2(x.y(), x.x());
  const Complex y = p[coeff_index(l, am)] * std::polar(1.0, am * phi);
  if (m >= 0) return y;
  return (am % 2 == 0 ? 1.0 : -1.0) * std::conj(y);
}

double real_spherical_harmonic(int l, int m, const UnitVec3& x) {
  double s = 0;
  const double c = colatitude_of(x, s);
  const auto p = normalized_legendre(l, c, s);
  const double phi = std::atan2(x.y(), x.x());
  if (m == 0) return p[coeff_index(l, 0)];
  const int am = std::abs(m);
  const double v = std::sqrt(2.0) * p[coeff_index(l, am)];
  return m > 0 ? v * std::cos(am * phi) : v * std::sin(am * phi);
}

ShCoeffs forward_sht(std::span<const Complex> field, const EquiangularGrid& grid, int L) {
  check_bandwidth(L, grid);
  const std::size_t G = grid.size();
  if (field.size() != G * G) throw ArgumentError("field size does not match the grid");
  ShCoeffs out(L);
  std::vector<Complex> ring(2 * static_cast<std::size_t>(L) + 1);
  for (std::size_t j = 0; j < G; ++j) {
    // Longitudinal Fourier sums F_j(m) = sum_k f(j, k) e^{-i m phi_k}.
    for (int m = -L; m <= L; ++m) {
      Complex acc = 0;
      for (std::size_t k = 0; k < G; ++k) acc += field[j * G + k] * std::polar(1.0, -m * grid.phi(k));
      ring[static_cast<std::size_t>(m + L)] = acc;
    }
    const auto p = normalized_legendre(L, std::cos(grid.theta(j)), std::sin(grid.theta(j)));
    const double w = grid.weight(j);
    for (int l = 0; l <= L; ++l) {
      for (int m = -l; m <= l; ++m) {
        const int am = std::abs(m);
        // conj(Y_l^m) = Pbar_l^|m| e^{-i m phi} times (-1)^m for negative m.
        const double sign = (m < 0 && am % 2 == 1) ? -1.0 : 1.0;
        out(l, m) += w * sign * p[coeff_index(l, am)] * ring[static_cast<std::size_t>(m + L)];
      }
    }
  }
  return out;
}

ShCoeffs forward_sht(std::span<const double> field, const EquiangularGrid& grid, int L) {
  std::vector<Complex> c(field.begin(), field.end());
  return forward_sht(std::span<const Complex>(c), grid, L);
}

std::vector<Complex> inverse_sht(const ShCoeffs& coeffs, const EquiangularGrid& grid) {
  const int L = coeffs.bandwidth;
  check_bandwidth(L, grid);
  if (coeffs.values.size() != coeff_count(L)) throw BandwidthError("coefficient count does not match bandwidth");
  const std::size_t G = grid.size();
  std::vector<Complex> out(G * G);
  std::vector<Complex> ring(2 * static_cast<std::size_t>(L) + 1);
  for (std::size_t j = 0; j < G; ++j) {
    const auto p = normalized_legendre(L, std::cos(grid.theta(j)), std::sin(grid.theta(j)));
    std::fill(ring.begin(), ring.end(), Complex{});
    for (int l = 0; l <= L; ++l) {
      for (int m = -l; m <= l; ++m) {
        const int am = std::abs(m);
        const double sign = (m < 0 && am % 2 == 1) ? -1.0 : 1.0;
        ring[static_cast<std::size_t>(m + L)] += coeffs(l, m) * sign * p[coeff_index(l, am)];
      }
    }
    for (std::size_t k = 0; k < G; ++k) {
      Complex acc = 0;
      for (int m = -L; m <= L; ++m) acc += ring[static_cast<std::size_t>(m + L)] * std::polar(1.0, m * grid.phi(k));
      out[j * G + k] = acc;
    }
  }
  return out;
}

Complex synthesize_at(const ShCoeffs& coeffs, const UnitVec3& x) {
  const int L = coeffs.bandwidth;
  double s = 0;
  const double c = colatitude_of(x, s);
  const auto p = normalized_legendre(L, c, s);
  const double phi = std::atan2(x.y(), x.x());
  Complex acc = 0;
  for (int l = 0; l <= L; ++l) {
    for (int m = -l; m <= l; ++m) {
      const int am = std::abs(m);
      const double sign = (m < 0 && am % 2 == 1) ? -1.0 : 1.0;
      acc += coeffs(l, m) * sign * p[coeff_index(l, am)] * std::polar(1.0, m * phi);
    }
  }
  return acc;
}

ShCoeffs zonal_convolve(const ShCoeffs& f, const ZonalFilter& k) {
  if (k.bandwidth() != f.bandwidth) throw BandwidthError("zonal filter bandwidth does not match coefficients");
  ShCoeffs out(f.bandwidth);
  for (int l = 0; l <= f.bandwidth; ++l) {
    const double s = std::sqrt(4.0 * kPi / (2.0 * l + 1.0)) * k.k[static_cast<std::size_t>(l)];
    for (int m = -l; m <= l; ++m) out(l, m) = s * f(l, m);
  }
  return out;
}

std::vector<int> anchor_degrees(std::size_t anchor_count, int L) {
  if (anchor_count < 2) throw ArgumentError("zonal filter interpolation needs at least 2 anchors");
  std::vector<int> deg(anchor_count);
  const double span = static_cast<double>(anchor_count - 1);
  for (std::size_t i = 0; i < anchor_count; ++i)
    deg[i] = static_cast<int>(std::lround(static_cast<double>(i) * L / span));
  return deg;
}

std::vector<double> zonal_interpolation_matrix(std::size_t anchor_count, int L) {
  const auto deg = anchor_degrees(anchor_count, L);
  const std::size_t A = anchor_count;
  std::vector<double> m(static_cast<std::size_t>(L + 1) * A, 0.0);
  for (int l = 0; l <= L; ++l) {
    // Last segment whose start degree is <= l.
    std::size_t seg = 0;
    for (std::size_t i = 0; i + 1 < A; ++i)
      if (deg[i] <= l) seg = i;
    const int d0 = deg[seg], d1 = deg[seg + 1];
    double t = d1 > d0 ? static_cast<double>(l - d0) / (d1 - d0) : 1.0;
    t = std::clamp(t, 0.0, 1.0);
    m[static_cast<std::size_t>(l) * A + seg] += 1.0 - t;
    m[static_cast<std::size_t>(l) * A + seg + 1] += t;
  }
  return m;
}

ZonalFilter interpolate_zonal_filter(std::span<const double> anchors, int L) {
  const auto m = zonal_interpolation_matrix(anchors.size(), L);
  ZonalFilter f;
  f.k.assign(static_cast<std::size_t>(L + 1), 0.0);
  for (int l = 0; l <= L; ++l)
    for (std::size_t a = 0; a < anchors.size(); ++a)
      f.k[static_cast<std::size_t>(l)] += m[static_cast<std::size_t>(l) * anchors.size() + a] * anchors[a];
  return f;
}

RealShBasis::RealShBasis(const EquiangularGrid& grid, int L)
    : bandwidth_(L), ncoef_(sh::coeff_count(L)), nodes_(grid.node_count()) {
  check_bandwidth(L, grid);
  const std::size_t G = grid.size();
  analysis_.assign(ncoef_ * nodes_, 0.0);
  synthesis_.assign(nodes_ * ncoef_, 0.0);
  degree_of_.resize(ncoef_);
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m) degree_of_[coeff_index(l, m)] = static_cast<std::size_t>(l);
  for (std::size_t j = 0; j < G; ++j) {
    const auto p = normalized_legendre(L, std::cos(grid.theta(j)), std::sin(grid.theta(j)));
    for (std::size_t k = 0; k < G; ++k) {
      const std::size_t node = j * G + k;
      // Use the reflected longitude for mirrored nodes so the reflection
      // symmetry of the basis is exact on the grid.
      const bool mirrored = k > G / 2;
      const double phi = grid.phi(mirrored ? G - k : k);
      for (int l = 0; l <= L; ++l) {
        for (int m = -l; m <= l; ++m) {
          const int am = std::abs(m);
          double y;
          if (m == 0) {
            y = p[coeff_index(l, 0)];
          } else if (m > 0) {
            y = std::sqrt(2.0) * p[coeff_index(l, am)] * std::cos(am * phi);
          } else {
            y = std::sqrt(2.0) * p[coeff_index(l, am)] * std::sin(am * phi);
            if (mirrored) y = -y;
          }
          const std::size_t c = coeff_index(l, m);
          synthesis_[node * ncoef_ + c] = y;
          analysis_[c * nodes_ + node] = grid.weight(j) * y;
        }
      }
    }
  }
}

}  // namespace hrtfnp::sh
