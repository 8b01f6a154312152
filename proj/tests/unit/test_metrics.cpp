#include <cmath>

#include "doctest.h"
#include "hrtfnp/errors.hpp"
#include "hrtfnp/metrics.hpp"
#include "hrtfnp/random.hpp"

using namespace hrtfnp;
using namespace hrtfnp::metrics;

TEST_CASE("lre") {
  CHECK(*lre(1.1, 1.0) == doctest::Approx(-20.0).epsilon(1e-12));
  CHECK(*lre(2.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(*lre(Complex(0.3, 0.4), Complex(0.3, 0.4)) == kLreFloorDb);
  CHECK_FALSE(lre(1.0, 0.0).has_value());
}

TEST_CASE("lmd") {
  const Complex m(0.2, -0.7);
  CHECK(*lmd(10.0 * m, m) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(*lmd(m / 10.0, m) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(*lmd(m, m) == 0.0);
  CHECK_FALSE(lmd(0.0, m).has_value());
  CHECK_FALSE(lmd(m, 0.0).has_value());
}

TEST_CASE("lsd") {
  RandomStream rng(1);
  std::vector<Complex> truth;
  for (int i = 0; i < 10; ++i) truth.emplace_back(rng.normal(), rng.normal());
  CHECK(*lsd(truth, truth).db == 0.0);
  std::vector<Complex> both = truth, left = truth;
  for (auto& v : both) v *= 10.0;
  for (int i = 0; i < 5; ++i) left[i] *= 10.0;
  CHECK(*lsd(truth, both).db == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(*lsd(truth, left).db == doctest::Approx(10.0).epsilon(1e-12));

  auto holed = truth;
  holed[2] = 0.0;
  const auto r = lsd(holed, both);
  CHECK(r.excluded == 1);
  CHECK(*r.db == doctest::Approx(20.0).epsilon(1e-12));
  CHECK_THROWS_AS(lsd(truth, {}), ArgumentError);
}

TEST_CASE("metrics are invariant to a common complex scale") {
  RandomStream rng(2);
  for (int i = 0; i < 50; ++i) {
    const Complex a(rng.normal(), rng.normal()), b(rng.normal(), rng.normal()), c(rng.normal(), rng.normal());
    CHECK(*lre(c * a, c * b) == doctest::Approx(*lre(a, b)).epsilon(1e-9));
    CHECK(*lmd(c * a, c * b) == doctest::Approx(*lmd(a, b)).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("calibration curve") {
  std::vector<CalibrationPair> same(7, {0.3, 0.3});
  for (const auto& row : calibration_curve(same, 3)) {
    CHECK(row.mpv == doctest::Approx(0.3));
    CHECK(row.mse == doctest::Approx(0.3));
  }

  RandomStream rng(3);
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < 103; ++i) pairs.push_back({rng.uniform(), rng.uniform()});
  const auto rows = calibration_curve(pairs, 10);
  REQUIRE(rows.size() == 10);
  std::size_t total = 0;
  for (std::size_t d = 0; d < rows.size(); ++d) {
    CHECK(rows[d].count == (d < 3 ? 11u : 10u));
    if (d > 0) CHECK(rows[d].mpv >= rows[d - 1].mpv);
    total += rows[d].count;
  }
  CHECK(total == 103);

  CHECK_THROWS_AS(calibration_curve(pairs, 0), ArgumentError);
  CHECK_THROWS_AS(calibration_curve(pairs, 104), ArgumentError);
  CHECK_THROWS_AS(calibration_curve({{-1.0, 1.0}}, 1), ArgumentError);
}

TEST_CASE("mcd") {
  std::vector<CalibrationRow> equal{{0.5, 0.5, 1}, {2.0, 2.0, 1}};
  CHECK(mcd(equal) == 0.0);
  std::vector<CalibrationRow> doubled{{0.5, 1.0, 1}, {2.0, 4.0, 1}, {3.0, 6.0, 1}};
  CHECK(mcd(doubled) == doctest::Approx(3.0103).epsilon(1e-5));
  CHECK(mcd({{1.0, 10.0, 1}}) == doctest::Approx(10.0).epsilon(1e-12));
  // Over and under confidence count alike.
  CHECK(mcd({{1.0, 2.0, 1}, {2.0, 1.0, 1}}) == doctest::Approx(3.0103).epsilon(1e-5));
  CHECK_THROWS_AS(mcd({{0.0, 1.0, 1}}), DomainError);
  CHECK_THROWS_AS(mcd({}), ArgumentError);
}

TEST_CASE("calibrated Monte-Carlo pairs give a small MCD") {
  RandomStream rng(4);
  std::vector<CalibrationPair> pairs;
  for (int i = 0; i < 100000; ++i) {
    const double v = std::exp(rng.uniform(-4.0, 2.0));
    const double e = std::sqrt(v) * rng.normal();
    pairs.push_back({v, e * e});
  }
  const auto rows = calibration_curve(pairs, 10);
  for (const auto& r : rows) CHECK(std::abs(r.mse / r.mpv - 1.0) < 0.1);
  CHECK(mcd(rows) < 0.5);
}

TEST_CASE("calibration pairs split real and imaginary parts") {
  Prediction p{{Complex(1, 2)}, {Complex(0.5, 2.0)}};
  std::vector<CalibrationPair> out;
  append_calibration_pairs({Complex(2, 0)}, p, out);
  REQUIRE(out.size() == 2);
  CHECK(out[0].variance == 0.25);
  CHECK(out[0].squared_error == 1.0);
  CHECK(out[1].variance == 4.0);
  CHECK(out[1].squared_error == 4.0);
  CHECK_THROWS_AS(append_calibration_pairs({Complex(2, 0)}, Prediction{{Complex(1, 2)}, {}}, out), ArgumentError);
}
