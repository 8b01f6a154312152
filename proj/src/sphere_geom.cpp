#include "hrtfnp/sphere_geom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "hrtfnp/errors.hpp"

namespace hrtfnp {
namespace {

using Vec = std::array<double, 3>;

Vec sub(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec cross(const Vec& a, const Vec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

double det3(const UnitVec3& a, const UnitVec3& b, const UnitVec3& c) {
  return dot(a.array(), cross(b.array(), c.array()));
}

constexpr double kSlack = 1e-12;
constexpr double kMinSeparation = 1e-9;

// Interior angle at vertex p of the spherical triangle (p, q, r).
double vertex_angle(const Vec& p, const Vec& q, const Vec& r) {
  const double pq = dot(p, q);
  const double pr = dot(p, r);
  const Vec tq = {q[0] - pq * p[0], q[1] - pq * p[1], q[2] - pq * p[2]};
  const Vec tr = {r[0] - pr * p[0], r[1] - pr * p[1], r[2] - pr * p[2]};
  return std::atan2(norm(cross(tq, tr)), dot(tq, tr));
}

// Angle-sum area without the vertex-separation precondition. Triangles with
// (numerically) coincident vertices have zero area.
double excess_unchecked(const UnitVec3& a, const UnitVec3& b, const UnitVec3& c) {
  const Vec pa = a.array(), pb = b.array(), pc = c.array();
  constexpr double kTiny = 1e-15;
  if (norm(sub(pa, pb)) < kTiny || norm(sub(pb, pc)) < kTiny || norm(sub(pc, pa)) < kTiny) return 0.0;
  const double e = vertex_angle(pa, pb, pc) + vertex_angle(pb, pc, pa) + vertex_angle(pc, pa, pb) -
                   std::numbers::pi;
  return std::max(e, 0.0);
}

void check_triangle(const SphericalTriangle& t) {
  const UnitVec3* v[3] = {&t.a, &t.b, &t.c};
  for (int i = 0; i < 3; ++i) {
    const double ang = angular_distance(*v[i], *v[(i + 1) % 3]);
    if (!(ang > kMinSeparation) || !(ang < std::numbers::pi - kMinSeparation)) {
      throw DomainError("degenerate spherical triangle: coincident or antipodal vertices");
    }
  }
}

}  // namespace

UnitVec3::UnitVec3(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (!std::isfinite(n) || n < 1e-300) throw DomainError("cannot normalize a zero or non-finite vector");
  x_ = x / n;
  y_ = y / n;
  z_ = z / n;
}

UnitVec3 unit_from_spherical(double azimuth, double elevation) {
  if (!(elevation >= -std::numbers::pi / 2 && elevation <= std::numbers::pi / 2)) {
    throw DomainError("elevation outside [-pi/2, pi/2]");
  }
  const double ce = std::cos(elevation);
  return UnitVec3::from_unit(ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation));
}

double angular_distance(const UnitVec3& a, const UnitVec3& b) {
  // atan2 form stays accurate for nearly coincident and nearly antipodal pairs.
  return std::atan2(norm(cross(a.array(), b.array())), a.dot(b));
}

Rotation3::Rotation3() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Rotation3 Rotation3::from_quaternion(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n > 0) || !std::isfinite(n)) throw DomainError("quaternion must be non-zero and finite");
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  return Rotation3({1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                    2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                    2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)});
}

Rotation3 Rotation3::about_axis(const UnitVec3& axis, double angle) {
  const double s = std::sin(angle / 2);
  return from_quaternion(std::cos(angle / 2), s * axis.x(), s * axis.y(), s * axis.z());
}

UnitVec3 Rotation3::apply(const UnitVec3& p) const {
  const auto& m = m_;
  return UnitVec3::from_unit(m[0] * p.x() + m[1] * p.y() + m[2] * p.z(),
                             m[3] * p.x() + m[4] * p.y() + m[5] * p.z(),
                             m[6] * p.x() + m[7] * p.y() + m[8] * p.z());
}

Rotation3 Rotation3::transpose() const {
  const auto& m = m_;
  return Rotation3({m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]});
}

Rotation3 Rotation3::operator*(const Rotation3& o) const {
  std::array<double, 9> r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[3 * i + j] += m_[3 * i + k] * o.m_[3 * k + j];
  return Rotation3(r);
}

double Rotation3::determinant() const {
  const auto& m = m_;
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Rotation3 random_rotation(RandomStream& rng) {
  for (;;) {
    const double w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
    if (w * w + x * x + y * y + z * z > 1e-20) return Rotation3::from_quaternion(w, x, y, z);
  }
}

UnitVec3 random_unit(RandomStream& rng) {
  for (;;) {
    const double x = rng.normal(), y = rng.normal(), z = rng.normal();
    if (x * x + y * y + z * z > 1e-20) return UnitVec3(x, y, z);
  }
}

std::vector<UnitVec3> approx_uniform_grid(std::size_t count) {
  std::vector<UnitVec3> out;
  if (count == 0) return out;
  if (count == 1) {
    out.push_back(UnitVec3::from_unit(0, 0, 1));
    return out;
  }
  out.reserve(count);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double n = static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(i);
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

double min_pairwise_angle(std::span<const UnitVec3> points) {
  if (points.size() < 2) throw ArgumentError("min_pairwise_angle needs at least two points");
  double best = std::numbers::pi;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      best = std::min(best, angular_distance(points[i], points[j]));
  return best;
}

double spherical_triangle_area(const SphericalTriangle& t) {
  check_triangle(t);
  return excess_unchecked(t.a, t.b, t.c);
}

bool triangle_contains(const SphericalTriangle& t, const UnitVec3& x) {
  const double orient = det3(t.a, t.b, t.c);
  const double s = orient >= 0 ? 1.0 : -1.0;
  return s * det3(t.a, t.b, x) >= -kSlack && s * det3(t.b, t.c, x) >= -kSlack &&
         s * det3(t.c, t.a, x) >= -kSlack && x.dot(t.a) + x.dot(t.b) + x.dot(t.c) > 0.0;
}

BarycentricWeights barycentric_coords(const UnitVec3& x, const SphericalTriangle& t) {
  check_triangle(t);
  if (!triangle_contains(t, x)) throw ContainmentError("point lies outside the spherical triangle");
  if (x == t.a) return {1, 0, 0};
  if (x == t.b) return {0, 1, 0};
  if (x == t.c) return {0, 0, 1};
  const double s1 = excess_unchecked(x, t.b, t.c);
  const double s2 = excess_unchecked(t.a, x, t.c);
  const double s3 = excess_unchecked(t.a, t.b, x);
  const double total = s1 + s2 + s3;
  if (!(total > 0)) throw DomainError("spherical triangle has zero area");
  return {s1 / total, s2 / total, s3 / total};
}

std::size_t nearest_index(const UnitVec3& q, std::span<const UnitVec3> points) {
  if (points.empty()) throw ArgumentError("nearest_index on an empty point list");
  std::size_t best = 0;
  double best_dot = q.dot(points[0]);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = q.dot(points[i]);
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return best;
}

namespace {

// Incremental 3-D convex hull. Each insertion removes the faces that see the
// new point and fans the horizon to it.
class HullBuilder {
 public:
  explicit HullBuilder(std::span<const UnitVec3> pts) : pts_(pts) {}

  std::vector<SphericalTriangulation::Face> build() {
    const std::size_t n = pts_.size();
    std::size_t i0 = 0, i1 = n, i2 = n, i3 = n;
    for (std::size_t i = 1; i < n; ++i) {
      if (norm(sub(p(i), p(i0))) > 1e-12) {
        i1 = i;
        break;
      }
    }
    if (i1 == n) throw GeometryError("degenerate hull: all points coincide");
    double best = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = norm(cross(sub(p(i1), p(i0)), sub(p(i), p(i0))));
      if (a > best) {
        best = a;
        i2 = i;
      }
    }
    if (i2 == n || best < 1e-12) throw GeometryError("degenerate hull: all points collinear");
    best = 0;
    const Vec nrm = cross(sub(p(i1), p(i0)), sub(p(i2), p(i0)));
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::abs(dot(nrm, sub(p(i), p(i0))));
      if (v > best) {
        best = v;
        i3 = i;
      }
    }
    if (i3 == n || best < 1e-10) throw GeometryError("degenerate hull: all points coplanar");

    for (int k = 0; k < 3; ++k) centroid_[k] = (p(i0)[k] + p(i1)[k] + p(i2)[k] + p(i3)[k]) / 4.0;
    add_oriented(i0, i1, i2);
    add_oriented(i0, i1, i3);
    add_oriented(i0, i2, i3);
    add_oriented(i1, i2, i3);

    for (std::size_t i = 0; i < n; ++i) {
      if (i == i0 || i == i1 || i == i2 || i == i3) continue;
      insert(i);
    }
    std::vector<SphericalTriangulation::Face> out;
    for (const auto& f : faces_)
      if (f.alive) out.push_back(f.v);
    return out;
  }

 private:
  struct HullFace {
    SphericalTriangulation::Face v;
    bool alive = true;
  };

  const Vec& p(std::size_t i) {
    if (cache_.empty()) {
      cache_.reserve(pts_.size());
      for (const auto& q : pts_) cache_.push_back(q.array());
    }
    return cache_[i];
  }

  static std::uint64_t key(std::size_t a, std::size_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
  }

  double volume(const HullFace& f, const Vec& q) {
    const Vec& a = p(f.v[0]);
    return dot(cross(sub(p(f.v[1]), a), sub(p(f.v[2]), a)), sub(q, a));
  }

  void add_face(std::size_t a, std::size_t b, std::size_t c) {
    const std::size_t id = faces_.size();
    faces_.push_back({{a, b, c}, true});
    edge_face_[key(a, b)] = id;
    edge_face_[key(b, c)] = id;
    edge_face_[key(c, a)] = id;
  }

  void add_oriented(std::size_t a, std::size_t b, std::size_t c) {
    const Vec nrm = cross(sub(p(b), p(a)), sub(p(c), p(a)));
    if (dot(nrm, sub(centroid_, p(a))) > 0) std::swap(b, c);
    add_face(a, b, c);
  }

  void insert(std::size_t idx) {
    const Vec& q = p(idx);
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (faces_[f].alive && volume(faces_[f], q) > kSlack) visible.push_back(f);
    }
    // No visible face: the point is on the hull surface within tolerance
    // (a near-duplicate); it does not become a vertex.
    if (visible.empty()) return;
    std::vector<char> is_visible(faces_.size(), 0);
    for (auto f : visible) is_visible[f] = 1;
    std::vector<std::pair<std::size_t, std::size_t>> horizon;
    for (auto f : visible) {
      const auto& v = faces_[f].v;
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = v[e], b = v[(e + 1) % 3];
        const auto it = edge_face_.find(key(b, a));
        if (it == edge_face_.end() || !is_visible[it->second]) horizon.emplace_back(a, b);
      }
    }
    for (auto f : visible) {
      faces_[f].alive = false;
      const auto& v = faces_[f].v;
      for (int e = 0; e < 3; ++e) {
        const auto it = edge_face_.find(key(v[e], v[(e + 1) % 3]));
        if (it != edge_face_.end() && it->second == f) edge_face_.erase(it);
      }
    }
    for (const auto& [a, b] : horizon) add_face(a, b, idx);
  }

  std::span<const UnitVec3> pts_;
  std::vector<Vec> cache_;
  std::vector<HullFace> faces_;
  std::unordered_map<std::uint64_t, std::size_t> edge_face_;
  Vec centroid_{};
};

}  // namespace

SphericalTriangulation::SphericalTriangulation(std::span<const UnitVec3> points)
    : points_(points.begin(), points.end()) {
  if (points_.size() < 4) throw ArgumentError("spherical triangulation needs at least 4 points");
  const auto hull = HullBuilder(points_).build();
  for (const auto& f : hull) {
    const Vec& a = points_[f[0]].array();
    const Vec nrm = cross(sub(points_[f[1]].array(), a), sub(points_[f[2]].array(), a));
    // The origin must lie strictly inside the face's half-space for the
    // face to be a proper (less than hemispherical) spherical triangle.
    if (dot(nrm, a) > kSlack * norm(nrm)) {
      faces_.push_back(f);
      areas_.push_back(excess_unchecked(points_[f[0]], points_[f[1]], points_[f[2]]));
    } else {
      covers_sphere_ = false;
    }
  }
  if (faces_.empty()) throw GeometryError("degenerate hull: no face sees the origin");
}

std::optional<SphericalTriangulation::Face> SphericalTriangulation::locate(const UnitVec3& x) const {
  std::optional<Face> best;
  double best_area = 0;
  std::array<std::size_t, 3> best_sorted{};
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    const auto& f = faces_[i];
    const UnitVec3& a = points_[f[0]];
    const UnitVec3& b = points_[f[1]];
    const UnitVec3& c = points_[f[2]];
    if (det3(a, b, x) < -kSlack || det3(b, c, x) < -kSlack || det3(c, a, x) < -kSlack) continue;
    if (x.dot(a) + x.dot(b) + x.dot(c) <= 0) continue;
    std::array<std::size_t, 3> sorted = f;
    std::sort(sorted.begin(), sorted.end());
    if (!best || areas_[i] < best_area || (areas_[i] == best_area && sorted < best_sorted)) {
      best = f;
      best_area = areas_[i];
      best_sorted = sorted;
    }
  }
  return best;
}

std::array<std::size_t, 3> enclosing_triangle(const UnitVec3& x, std::span<const UnitVec3> points) {
  const SphericalTriangulation tri(points);
  const auto f = tri.locate(x);
  if (!f) throw GeometryError("query direction is not covered by the triangulation");
  std::array<std::size_t, 3> out = *f;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace hrtfnp
