#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "hrtfnp/errors.hpp"
#include "hrtfnp/sphere_geom.hpp"
#include "support/oracles.hpp"

using namespace hrtfnp;

namespace {
constexpr double kPi = std::numbers::pi;

UnitVec3 e1() { return UnitVec3(1, 0, 0); }
UnitVec3 e2() { return UnitVec3(0, 1, 0); }
UnitVec3 e3() { return UnitVec3(0, 0, 1); }

void check_close(const UnitVec3& a, double x, double y, double z, double tol = 1e-15) {
  CHECK(std::abs(a.x() - x) <= tol);
  CHECK(std::abs(a.y() - y) <= tol);
  CHECK(std::abs(a.z() - z) <= tol);
}
}  // namespace

TEST_CASE("unit_from_spherical convention") {
  check_close(unit_from_spherical(0, 0), 1, 0, 0);
  check_close(unit_from_spherical(kPi / 2, 0), 0, 1, 0, 1e-15);
  check_close(unit_from_spherical(0, kPi / 2), 0, 0, 1, 1e-15);
  CHECK_THROWS_AS(unit_from_spherical(0, 2.0), DomainError);
  CHECK_THROWS_AS(UnitVec3(0, 0, 0), DomainError);
}

TEST_CASE("mirror_median") {
  CHECK(mirror_median(e2()) == UnitVec3::from_unit(0, -1, 0));
  CHECK(mirror_median(e1()) == e1());
  RandomStream rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_unit(rng), q = random_unit(rng), r = random_unit(rng);
    CHECK(mirror_median(mirror_median(p)) == p);
    CHECK(mirror_median(p).dot(mirror_median(q)) == doctest::Approx(p.dot(q)).epsilon(1e-15));
    if (angular_distance(p, q) > 0.1 && angular_distance(q, r) > 0.1 && angular_distance(p, r) > 0.1 &&
        angular_distance(p, q) < 3.0 && angular_distance(q, r) < 3.0 && angular_distance(p, r) < 3.0) {
      CHECK(spherical_triangle_area({mirror_median(p), mirror_median(q), mirror_median(r)}) ==
            doctest::Approx(spherical_triangle_area({p, q, r})).epsilon(1e-12));
    }
  }
}

TEST_CASE("random_rotation") {
  RandomStream a(11), b(11);
  const auto Ra = random_rotation(a), Rb = random_rotation(b);
  CHECK(Ra.matrix() == Rb.matrix());

  RandomStream rng(5);
  double mean[3] = {0, 0, 0};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto R = random_rotation(rng);
    if (i < 1000) {
      CHECK(std::abs(R.determinant() - 1.0) < 1e-12);
      const auto RtR = R.transpose() * R;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(std::abs(RtR(r, c) - (r == c ? 1.0 : 0.0)) < 1e-12);
    }
    const auto v = R.apply(e3());
    mean[0] += v.x();
    mean[1] += v.y();
    mean[2] += v.z();
  }
  const double norm = std::sqrt(mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]) / draws;
  CHECK(norm < 0.02);
}

TEST_CASE("rotations preserve dot products") {
  RandomStream rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto R = random_rotation(rng);
    const auto x = random_unit(rng), y = random_unit(rng);
    CHECK(std::abs(R.apply(x).dot(R.apply(y)) - x.dot(y)) < 1e-12);
    const auto Rx = R.apply(x);
    CHECK(std::abs(std::sqrt(Rx.dot(Rx)) - 1.0) < 1e-12);
  }
}

TEST_CASE("approx_uniform_grid") {
  CHECK(approx_uniform_grid(0).empty());
  const auto one = approx_uniform_grid(1);
  REQUIRE(one.size() == 1);
  check_close(one[0], 0, 0, 1);

  const auto g = approx_uniform_grid(100);
  REQUIRE(g.size() == 100);
  double brute = kPi;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j)
      brute = std::min(brute, std::acos(std::clamp(g[i].dot(g[j]), -1.0, 1.0)));
  CHECK(std::abs(min_pairwise_angle(g) - brute) <= 0.25 * brute);
  // Near-uniform: the closest pair is not much closer than the ideal spacing.
  CHECK(brute > 0.5 * std::sqrt(4 * kPi / 100));

  for (std::size_t n = 0; n <= 100; ++n) {
    const auto a = approx_uniform_grid(n), b = approx_uniform_grid(n);
    CHECK(a == b);
    for (const auto& p : a) CHECK(std::abs(std::sqrt(p.dot(p)) - 1.0) < 1e-12);
  }
}

TEST_CASE("spherical_triangle_area") {
  CHECK(spherical_triangle_area({e1(), e2(), e3()}) == doctest::Approx(kPi / 2).epsilon(1e-14));
  const double sliver = spherical_triangle_area({e1(), UnitVec3(1, 1e-6, 0), UnitVec3(1, 0, 1e-6)});
  CHECK(sliver > 0.0);
  CHECK(sliver < 1e-11);
  CHECK_THROWS_AS(spherical_triangle_area({e1(), e1(), e2()}), DomainError);
  CHECK_THROWS_AS(spherical_triangle_area({e1(), UnitVec3(-1, 0, 0), e2()}), DomainError);

  RandomStream rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_unit(rng), b = random_unit(rng), c = random_unit(rng);
    const double area = spherical_triangle_area({a, b, c});
    CHECK(std::abs(area - oracle::lhuilier_area(a, b, c)) < 1e-10);
  }
}

TEST_CASE("barycentric_coords") {
  const SphericalTriangle oct{e1(), e2(), e3()};
  auto w = barycentric_coords(e1(), oct);
  CHECK(w.b1 == 1.0);
  CHECK(w.b2 == 0.0);
  CHECK(w.b3 == 0.0);

  w = barycentric_coords(UnitVec3(1, 1, 1), oct);
  CHECK(w.b1 == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(w.b2 == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(w.b3 == doctest::Approx(1.0 / 3).epsilon(1e-12));

  CHECK_THROWS_AS(barycentric_coords(UnitVec3(-1, 1, 1), oct), ContainmentError);

  RandomStream rng(4);
  for (int i = 0; i < 300; ++i) {
    const UnitVec3 x(rng.uniform(0.01, 1), rng.uniform(0.01, 1), rng.uniform(0.01, 1));
    w = barycentric_coords(x, oct);
    const double total = oracle::lhuilier_area(e1(), e2(), e3());
    CHECK(std::abs(w.b1 - oracle::lhuilier_area(x, e2(), e3()) / total) < 1e-9);
    CHECK(std::abs(w.b2 - oracle::lhuilier_area(e1(), x, e3()) / total) < 1e-9);
    CHECK(std::abs(w.b3 - oracle::lhuilier_area(e1(), e2(), x) / total) < 1e-9);
    CHECK(std::abs(w.b1 + w.b2 + w.b3 - 1.0) < 1e-9);

    const auto R = random_rotation(rng);
    const auto wr = barycentric_coords(R.apply(x), {R.apply(e1()), R.apply(e2()), R.apply(e3())});
    CHECK(std::abs(wr.b1 - w.b1) < 1e-9);
    CHECK(std::abs(wr.b2 - w.b2) < 1e-9);
    CHECK(std::abs(wr.b3 - w.b3) < 1e-9);
  }
}

TEST_CASE("enclosing_triangle") {
  const std::vector<UnitVec3> octa{e1(), e2(), e3(), UnitVec3(-1, 0, 0), UnitVec3(0, -1, 0), UnitVec3(0, 0, -1)};
  const auto f = enclosing_triangle(UnitVec3(0.3, 0.5, 0.4), octa);
  CHECK(f == std::array<std::size_t, 3>{0, 1, 2});

  const SphericalTriangulation tri(octa);
  CHECK(tri.covers_sphere());
  CHECK(tri.faces().size() == 8);

  RandomStream rng(99);
  std::vector<UnitVec3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(random_unit(rng));
  const SphericalTriangulation del(pts);
  CHECK(del.faces().size() == 2 * pts.size() - 4);

  // Query at a data point: that point is a vertex of the returned face.
  for (std::size_t i = 0; i < 20; ++i) {
    const auto face = enclosing_triangle(pts[i], pts);
    CHECK(std::set<std::size_t>(face.begin(), face.end()).count(i) == 1);
    const auto w = barycentric_coords(pts[i], {pts[face[0]], pts[face[1]], pts[face[2]]});
    const double wi = face[0] == i ? w.b1 : face[1] == i ? w.b2 : w.b3;
    CHECK(wi == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Exhaustive face scan oracle: the returned face contains x, and it is a
  // hull face (no other point lies outside its plane).
  for (int q = 0; q < 1000; ++q) {
    const auto x = random_unit(rng);
    const auto face = enclosing_triangle(x, pts);
    CHECK(oracle::inside_by_volumes(pts[face[0]], pts[face[1]], pts[face[2]], x, 1e-12));
    bool any = false;
    for (const auto& g : del.faces())
      any = any || oracle::inside_by_volumes(pts[g[0]], pts[g[1]], pts[g[2]], x, 1e-12);
    CHECK(any);
  }

  std::vector<UnitVec3> ring;
  for (int i = 0; i < 8; ++i) ring.push_back(unit_from_spherical(2 * kPi * i / 8, 0));
  CHECK_THROWS_AS(enclosing_triangle(e3(), ring), GeometryError);
  CHECK_THROWS_AS(SphericalTriangulation(std::vector<UnitVec3>{e1(), e2(), e3()}), ArgumentError);
}

TEST_CASE("nearest_index") {
  RandomStream rng(2);
  std::vector<UnitVec3> pts;
  for (int i = 0; i < 1730; ++i) pts.push_back(random_unit(rng));
  CHECK(nearest_index(pts[5], pts) == 5);
  const std::vector<UnitVec3> lone{e1()};
  CHECK(nearest_index(UnitVec3(-1, 0, 0), lone) == 0);
  CHECK_THROWS_AS(nearest_index(e1(), std::vector<UnitVec3>{}), ArgumentError);
  for (int q = 0; q < 100; ++q) {
    const auto x = random_unit(rng);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (x.x() * pts[i].x() + x.y() * pts[i].y() + x.z() * pts[i].z() >
          x.x() * pts[best].x() + x.y() * pts[best].y() + x.z() * pts[best].z())
        best = i;
    CHECK(nearest_index(x, pts) == best);
  }
  const std::vector<UnitVec3> dup{e2(), e1(), e1()};
  CHECK(nearest_index(e1(), dup) == 1);
}
