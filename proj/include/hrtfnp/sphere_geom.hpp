#pragma once

// Unit-sphere geometry. Frame convention: the median plane is the x-z plane
// (y = 0) and the left ear points toward +y.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hrtfnp/random.hpp"

namespace hrtfnp {

/// Cartesian point on the unit sphere. Construction from arbitrary
/// components normalizes; operations that are exact isometries keep the bits.
class UnitVec3 {
 public:
  /// Defaults to the +z pole.
  UnitVec3() = default;
  UnitVec3(double x, double y, double z);

  /// Wraps components already known to be unit norm (within 1e-12).
  static UnitVec3 from_unit(double x, double y, double z) {
    UnitVec3 v;
    v.x_ = x;
    v.y_ = y;
    v.z_ = z;
    return v;
  }

  double x() const noexcept { return x_; }
  double y() const noexcept { return y_; }
  double z() const noexcept { return z_; }
  std::array<double, 3> array() const noexcept { return {x_, y_, z_}; }

  double dot(const UnitVec3& o) const noexcept { return x_ * o.x_ + y_ * o.y_ + z_ * o.z_; }

  friend bool operator==(const UnitVec3&, const UnitVec3&) = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 1.0;
};

/// (cos e cos a, cos e sin a, sin e). Throws DomainError unless e in [-pi/2, pi/2].
UnitVec3 unit_from_spherical(double azimuth, double elevation);

/// Negates y: reflection about the median plane.
inline UnitVec3 mirror_median(const UnitVec3& p) { return UnitVec3::from_unit(p.x(), -p.y(), p.z()); }

/// Angle between two unit vectors, radians in [0, pi].
double angular_distance(const UnitVec3& a, const UnitVec3& b);

/// Proper rotation matrix, row-major.
class Rotation3 {
 public:
  Rotation3();  // identity
  explicit Rotation3(const std::array<double, 9>& m) : m_(m) {}

  /// Rotation of a unit quaternion (w, x, y, z); the quaternion is normalized first.
  static Rotation3 from_quaternion(double w, double x, double y, double z);
  /// Rotation by angle about a unit axis.
  static Rotation3 about_axis(const UnitVec3& axis, double angle);

  double operator()(std::size_t r, std::size_t c) const { return m_[3 * r + c]; }
  const std::array<double, 9>& matrix() const noexcept { return m_; }

  UnitVec3 apply(const UnitVec3& p) const;
  Rotation3 transpose() const;
  Rotation3 operator*(const Rotation3& o) const;
  double determinant() const;

 private:
  std::array<double, 9> m_;
};

/// Uniform draw from SO(3) through a uniform unit quaternion.
Rotation3 random_rotation(RandomStream& rng);

/// Uniform point on the sphere (normalized 3-D Gaussian).
UnitVec3 random_unit(RandomStream& rng);

/// Fibonacci lattice with `count` points; count 1 yields the +z pole.
std::vector<UnitVec3> approx_uniform_grid(std::size_t count);

/// Minimum pairwise angle by exhaustive scan. Requires at least two points.
double min_pairwise_angle(std::span<const UnitVec3> points);

struct SphericalTriangle {
  UnitVec3 a, b, c;
};

struct BarycentricWeights {
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;
};

/// Spherical excess (sum of the three spherical angles minus pi).
/// Throws DomainError for coincident or antipodal vertices.
double spherical_triangle_area(const SphericalTriangle& t);

/// Weights as ratios of the sub-triangle areas opposite each vertex.
/// Throws ContainmentError when x lies outside t.
BarycentricWeights barycentric_coords(const UnitVec3& x, const SphericalTriangle& t);

/// True when x lies in the spherical triangle, boundary included
/// (signed-volume tests with 1e-12 slack).
bool triangle_contains(const SphericalTriangle& t, const UnitVec3& x);

/// Index of the point with the largest dot product with q; ties go to the
/// lowest index. Throws ArgumentError on an empty list.
std::size_t nearest_index(const UnitVec3& q, std::span<const UnitVec3> points);

/// Spherical Delaunay triangulation, built as the 3-D convex hull of the
/// points. Faces are stored counter-clockwise seen from outside.
class SphericalTriangulation {
 public:
  using Face = std::array<std::size_t, 3>;

  /// Throws ArgumentError for fewer than 4 points and GeometryError when
  /// the hull is degenerate (all points coplanar).
  explicit SphericalTriangulation(std::span<const UnitVec3> points);

  const std::vector<UnitVec3>& points() const noexcept { return points_; }

  /// Faces that map to proper spherical triangles (the origin lies on
  /// their inner side). When the points span more than a hemisphere these
  /// are all hull faces.
  const std::vector<Face>& faces() const noexcept { return faces_; }

  /// Whether every direction is covered by some face.
  bool covers_sphere() const noexcept { return covers_sphere_; }

  /// Containing face; ties on shared boundaries go to the smaller area,
  /// then to the lexicographically smaller sorted index triple.
  std::optional<Face> locate(const UnitVec3& x) const;

  SphericalTriangle triangle(const Face& f) const {
    return {points_[f[0]], points_[f[1]], points_[f[2]]};
  }

 private:
  std::vector<UnitVec3> points_;
  std::vector<Face> faces_;
  std::vector<double> areas_;
  bool covers_sphere_ = true;
};

/// Indices of the Delaunay face containing x, sorted ascending.
/// Throws GeometryError when the hull is degenerate or x is not covered.
std::array<std::size_t, 3> enclosing_triangle(const UnitVec3& x, std::span<const UnitVec3> points);

}  // namespace hrtfnp
