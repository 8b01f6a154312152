#include <chrono>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "doctest.h"
#include "hrtfnp/baselines.hpp"
#include "hrtfnp/errors.hpp"
#include "support/oracles.hpp"

using namespace hrtfnp;
using namespace hrtfnp::baseline;

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<DataPoint> random_context(std::size_t n, std::size_t bins, RandomStream& rng) {
  std::vector<DataPoint> ctx;
  for (std::size_t i = 0; i < n; ++i) {
    DataPoint d;
    d.location = random_unit(rng);
    d.index = i;
    for (std::size_t k = 0; k < 2 * bins; ++k) d.features.emplace_back(rng.normal(), rng.normal());
    ctx.push_back(d);
  }
  return ctx;
}

std::vector<UnitVec3> random_queries(std::size_t n, RandomStream& rng) {
  std::vector<UnitVec3> q;
  for (std::size_t i = 0; i < n; ++i) q.push_back(random_unit(rng));
  return q;
}

// Smooth field of degree <= 4 evaluated through the library-independent
// Legendre oracle: sum of zonal bumps around fixed poles.
double smooth_field(const UnitVec3& x) {
  const UnitVec3 a = UnitVec3(1, 2, 3), b = UnitVec3(-2, 0.5, 1);
  return 0.3 + oracle::legendre_rodrigues(2, x.dot(a)) - 0.5 * oracle::legendre_rodrigues(4, x.dot(b)) + x.z();
}

// Independent spline oracle: plain summation, full-pivot solve.
struct SplineOracle {
  std::vector<UnitVec3> locs;
  Eigen::VectorXd w;
  double d = 0;
  int trunc;

  static double kernel(double t, int trunc) {
    double s = 0, pm = 1, p = t;
    for (int l = 1; l <= trunc; ++l) {
      if (l > 1) {
        const double pn = ((2 * l - 1) * t * p - (l - 1) * pm) / l;
        pm = p;
        p = pn;
      }
      const double ll = l * (l + 1.0);
      s += (2.0 * l + 1.0) / (4.0 * kPi * ll * ll) * p;
    }
    return s;
  }

  SplineOracle(const std::vector<UnitVec3>& x, const std::vector<double>& y, int trunc_) : locs(x), trunc(trunc_) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = kernel(std::clamp(x[i].dot(x[j]), -1.0, 1.0), trunc);
      a(i, n) = a(n, i) = 1;
      rhs(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd sol = a.fullPivLu().solve(rhs);
    w = sol.head(n);
    d = sol(n);
  }

  double operator()(const UnitVec3& q) const {
    double s = d;
    for (std::size_t i = 0; i < locs.size(); ++i)
      s += w(static_cast<Eigen::Index>(i)) * kernel(std::clamp(q.dot(locs[i]), -1.0, 1.0), trunc);
    return s;
  }
};

}  // namespace

TEST_CASE("spherical_gaussian") {
  const UnitVec3 x(1, 0, 0), y(0, 1, 0), z(-1, 0, 0);
  CHECK(spherical_gaussian(x, x, {1.0}) == 1.0);
  CHECK(spherical_gaussian(x, y, {1.0}) == doctest::Approx(0.135335).epsilon(1e-5));
  CHECK(spherical_gaussian(x, z, {1.0}) == doctest::Approx(0.0183156).epsilon(1e-5));
  RandomStream rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_unit(rng), b = random_unit(rng);
    const double k = spherical_gaussian(a, b, {rng.uniform(0.1, 20)});
    CHECK(k > 0);
    CHECK(k <= 1);
  }
}

TEST_CASE("barycentric interpolation") {
  RandomStream rng(2);
  const auto ctx = random_context(60, 3, rng);
  std::vector<UnitVec3> at_ctx;
  for (const auto& d : ctx) at_ctx.push_back(d.location);
  const auto exact = barycentric_interpolate(ctx, at_ctx);
  for (std::size_t i = 0; i < ctx.size(); ++i)
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(exact[i][k] - ctx[i].features[k]) < 1e-12);

  auto constant = ctx;
  for (auto& d : constant) d.features.assign(6, Complex(2.5, -1.0));
  const auto queries = random_queries(1000, rng);
  for (const auto& row : barycentric_interpolate(constant, queries))
    for (const auto& v : row) CHECK(std::abs(v - Complex(2.5, -1.0)) < 1e-12);

  std::vector<DataPoint> octa;
  const UnitVec3 axes[6] = {UnitVec3(1, 0, 0), UnitVec3(0, 1, 0), UnitVec3(0, 0, 1),
                            UnitVec3(-1, 0, 0), UnitVec3(0, -1, 0), UnitVec3(0, 0, -1)};
  for (int i = 0; i < 6; ++i) octa.push_back({axes[i], {Complex(i, 0), Complex(0, i)}, static_cast<std::size_t>(i)});
  const std::vector<UnitVec3> center{UnitVec3(1, 1, 1)};
  const auto c = barycentric_interpolate(octa, center);
  CHECK(std::abs(c[0][0] - Complex(1.0, 0)) < 1e-12);
  CHECK(std::abs(c[0][1] - Complex(0, 1.0)) < 1e-12);

  // Exhaustive-scan oracle and convex-hull bound per component.
  std::vector<UnitVec3> locs;
  for (const auto& d : ctx) locs.push_back(d.location);
  const SphericalTriangulation tri(locs);
  const auto pred = barycentric_interpolate(ctx, queries);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto f = *tri.locate(queries[q]);
    CHECK(oracle::inside_by_volumes(locs[f[0]], locs[f[1]], locs[f[2]], queries[q], 1e-12));
    for (std::size_t k = 0; k < 6; ++k) {
      const double lo = std::min({ctx[f[0]].features[k].real(), ctx[f[1]].features[k].real(), ctx[f[2]].features[k].real()});
      const double hi = std::max({ctx[f[0]].features[k].real(), ctx[f[1]].features[k].real(), ctx[f[2]].features[k].real()});
      CHECK(pred[q][k].real() >= lo - 1e-12);
      CHECK(pred[q][k].real() <= hi + 1e-12);
    }
  }

  // Rotation equivariance.
  const auto R = random_rotation(rng);
  auto rotated = ctx;
  for (auto& d : rotated) d.location = R.apply(d.location);
  std::vector<UnitVec3> rq;
  for (std::size_t i = 0; i < 200; ++i) rq.push_back(R.apply(queries[i]));
  const auto pr = barycentric_interpolate(rotated, rq);
  for (std::size_t q = 0; q < 200; ++q)
    for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(pr[q][k] - pred[q][k]) < 1e-8);

  CHECK_THROWS_AS(barycentric_interpolate(std::span(ctx).first(3), queries), ArgumentError);
}

TEST_CASE("barycentric fallbacks") {
  RandomStream rng(3);
  const auto queries = random_queries(50, rng);
  CHECK(barycentric_predict({}, queries).size() == 50);
  const auto two = random_context(2, 1, rng);
  const auto p2 = barycentric_predict(two, queries);
  for (std::size_t q = 0; q < 50; ++q) {
    const bool first = queries[q].dot(two[0].location) >= queries[q].dot(two[1].location);
    CHECK(p2[q][0] == (first ? two[0] : two[1]).features[0]);
  }
  // Context confined to the upper hemisphere leaves the south pole uncovered.
  auto cap = random_context(30, 1, rng);
  for (auto& d : cap) d.location = UnitVec3(d.location.x(), d.location.y(), std::abs(d.location.z()) + 0.2);
  const std::vector<UnitVec3> south{UnitVec3(0, 0, -1)};
  CHECK_THROWS_AS(barycentric_interpolate(cap, south), GeometryError);
  const auto ps = barycentric_predict(cap, south);
  double lo = 1e9, hi = -1e9;
  for (const auto& d : cap) {
    lo = std::min(lo, d.features[0].real());
    hi = std::max(hi, d.features[0].real());
  }
  CHECK(ps[0][0].real() >= lo - 1e-12);
  CHECK(ps[0][0].real() <= hi + 1e-12);
}

TEST_CASE("spline kernel") {
  for (double t : {-1.0, -0.3, 0.0, 0.5, 0.99, 1.0}) {
    CHECK(std::abs(spline_kernel(t, 100) - SplineOracle::kernel(t, 100)) < 1e-14);
    CHECK(std::abs(spline_kernel(t, 10) - SplineOracle::kernel(t, 10)) < 1e-15);
  }
  // Telescoping sum at t = 1: sum (1/l^2 - 1/(l+1)^2) = 1 - 1/(L+1)^2.
  CHECK(spline_kernel(1.0, 50) == doctest::Approx((1.0 - 1.0 / (51.0 * 51.0)) / (4 * kPi)).epsilon(1e-14));
}

TEST_CASE("spline interpolation") {
  const UnitVec3 p(0.2, 0.3, 0.9);
  const UnitVec3 m = UnitVec3::from_unit(-p.x(), -p.y(), -p.z());
  std::vector<DataPoint> anti{{p, {Complex(1, 0)}, 0}, {m, {Complex(-1, 0)}, 1}};
  const std::vector<UnitVec3> at{p, m};
  const auto v = spline_predict(anti, at);
  CHECK(std::abs(v[0][0] - 1.0) < 1e-6);
  CHECK(std::abs(v[1][0] + 1.0) < 1e-6);

  RandomStream rng(4);
  auto ctx = random_context(25, 2, rng);
  for (auto& d : ctx) d.features.assign(4, Complex(-0.7, 3.0));
  for (const auto& row : spline_predict(ctx, random_queries(100, rng)))
    for (const auto& x : row) CHECK(std::abs(x - Complex(-0.7, 3.0)) < 1e-9);

  // 30 random points sampled from a smooth field.
  std::vector<DataPoint> field;
  std::vector<UnitVec3> locs;
  std::vector<double> ys;
  for (int i = 0; i < 30; ++i) {
    const auto x = random_unit(rng);
    locs.push_back(x);
    ys.push_back(smooth_field(x));
    field.push_back({x, {Complex(ys.back(), -ys.back())}, static_cast<std::size_t>(i)});
  }
  const auto sys = spline_fit(field);
  const auto self = spline_eval(sys, locs);
  for (int i = 0; i < 30; ++i) {
    CHECK(std::abs(self[i][0].real() - ys[i]) <= 1e-6 * std::max(1.0, std::abs(ys[i])));
    CHECK(std::abs(self[i][0].imag() + ys[i]) <= 1e-6 * std::max(1.0, std::abs(ys[i])));
  }
  const SplineOracle dense(locs, ys, 2 * kSplineTruncation);
  const auto queries = random_queries(200, rng);
  const auto pred = spline_eval(sys, queries);
  for (std::size_t q = 0; q < queries.size(); ++q) CHECK(std::abs(pred[q][0].real() - dense(queries[q])) < 1e-4);

  const auto R = random_rotation(rng);
  auto rot = field;
  for (auto& d : rot) d.location = R.apply(d.location);
  std::vector<UnitVec3> rq;
  for (const auto& q : queries) rq.push_back(R.apply(q));
  const auto prot = spline_predict(rot, rq);
  for (std::size_t q = 0; q < queries.size(); ++q) CHECK(std::abs(prot[q][0] - pred[q][0]) < 1e-8);

  auto dup = field;
  dup.push_back(field[3]);
  CHECK_THROWS_AS(spline_fit(dup), ConditioningError);
  CHECK_THROWS_AS(spline_fit({}), ArgumentError);
  CHECK(spline_predict({}, queries).size() == queries.size());
}

TEST_CASE("GP prior and one-point posterior") {
  const auto hyper = GpHyper::uniform(3, 5.0);
  RandomStream rng(5);
  const auto queries = random_queries(10, rng);
  const auto prior = gp_predict({}, queries, hyper);
  for (std::size_t q = 0; q < 10; ++q) {
    for (const auto& m : prior.mean[q]) CHECK(m == Complex(0, 0));
    for (double v : prior.variance[q]) CHECK(v == 1.0);
  }
  const UnitVec3 x(0.3, -0.4, 0.5);
  std::vector<DataPoint> one{{x, std::vector<Complex>(6, Complex(1, 1)), 0}};
  const std::vector<UnitVec3> at{x};
  const auto post = gp_predict(one, at, hyper);
  CHECK(post.mean[0][0].real() == doctest::Approx(1.0 / (1.0 + 1e-4)).epsilon(1e-12));
  CHECK(post.mean[0][0].real() == doctest::Approx(0.999900).epsilon(1e-6));
  CHECK(post.variance[0][0] == doctest::Approx(1e-4 / (1.0 + 1e-4)).epsilon(1e-6));
  CHECK(post.variance[0][0] == doctest::Approx(9.999e-5).epsilon(1e-3));
  const auto pred = gp_predictions(post, hyper.noise);
  CHECK(pred[0].stddev[0].real() == doctest::Approx(std::sqrt(post.variance[0][0] + 1e-4)));
}

TEST_CASE("GP matches a dense inverse oracle") {
  RandomStream rng(6);
  const std::size_t bins = 4;
  auto hyper = GpHyper::uniform(bins, 1.0);
  for (auto& b : hyper.beta) b = rng.uniform(0.5, 12.0);
  const auto ctx = random_context(20, bins, rng);
  const auto queries = random_queries(40, rng);
  const auto post = gp_predict(ctx, queries, hyper);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t part = 0; part < 2; ++part)
      for (std::size_t f = 0; f < bins; ++f) {
        const double beta = hyper.at(e, part, f);
        Eigen::MatrixXd k(20, 20);
        Eigen::VectorXd y(20);
        for (int i = 0; i < 20; ++i) {
          for (int j = 0; j < 20; ++j)
            k(i, j) = std::exp(-2 * beta * (1 - ctx[i].location.dot(ctx[j].location))) + (i == j ? 1e-4 : 0.0);
          const Complex v = ctx[i].features[e * bins + f];
          y(i) = part == 0 ? v.real() : v.imag();
        }
        const Eigen::MatrixXd kinv = k.inverse();
        for (std::size_t q = 0; q < queries.size(); ++q) {
          Eigen::VectorXd kq(20);
          for (int i = 0; i < 20; ++i) kq(i) = std::exp(-2 * beta * (1 - queries[q].dot(ctx[i].location)));
          const double mean = kq.dot(kinv * y);
          const double var = 1.0 - kq.dot(kinv * kq);
          const Complex m = post.mean[q][e * bins + f];
          CHECK(std::abs((part == 0 ? m.real() : m.imag()) - mean) < 1e-8);
          CHECK(std::abs(post.variance[q][(e * 2 + part) * bins + f] - var) < 1e-8);
          CHECK(post.variance[q][(e * 2 + part) * bins + f] >= 0.0);
          CHECK(post.variance[q][(e * 2 + part) * bins + f] <= 1.0);
        }
      }

  // Interpolation within the noise ratio, and rotation equivariance.
  std::vector<UnitVec3> at;
  for (const auto& d : ctx) at.push_back(d.location);
  const auto self = gp_predict(ctx, at, GpHyper::uniform(bins, 50.0));
  for (std::size_t i = 0; i < ctx.size(); ++i)
    CHECK(std::abs(self.mean[i][0] - ctx[i].features[0]) < 1e-2 * std::abs(ctx[i].features[0]) + 1e-3);
  const auto R = random_rotation(rng);
  auto rot = ctx;
  for (auto& d : rot) d.location = R.apply(d.location);
  std::vector<UnitVec3> rq;
  for (const auto& q : queries) rq.push_back(R.apply(q));
  const auto prot = gp_predict(rot, rq, hyper);
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (std::size_t k = 0; k < 2 * bins; ++k) CHECK(std::abs(prot.mean[q][k] - post.mean[q][k]) < 1e-8);
}

TEST_CASE("GP hyperparameter JSON") {
  auto h = GpHyper::uniform(3, 5.0);
  h.at(1, 0, 2) = 7.5;
  const auto back = GpHyper::from_json(h.to_json());
  CHECK(back.beta == h.beta);
  CHECK(back.noise == 1e-4);
  CHECK(back.at(1, 0, 2) == 7.5);
  CHECK_THROWS_AS(GpHyper::from_json(R"({"noise":1e-4,"beta":[[[1],[1]],[[1],[-1]]]})"), DataError);
  CHECK_THROWS_AS(GpHyper::from_json(R"({"noise":1e-4,"beta":[[[1],[1]]]})"), DataError);
  CHECK_THROWS_AS(GpHyper::from_json("{"), DataError);
}

TEST_CASE("log marginal likelihood gradient") {
  RandomStream rng(7);
  const auto ctx = random_context(15, 2, rng);
  for (double beta : {0.5, 3.0, 20.0}) {
    const auto v = gp_log_marginal_likelihood(ctx, 1, 1, 0, beta, 1e-4);
    const double h = 1e-5;
    const double up = gp_log_marginal_likelihood(ctx, 1, 1, 0, beta * std::exp(h), 1e-4).value;
    const double dn = gp_log_marginal_likelihood(ctx, 1, 1, 0, beta * std::exp(-h), 1e-4).value;
    CHECK(v.dlog_beta == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("GP fit recovers a known precision") {
  RandomStream rng(8);
  const double beta_star = 5.0;
  std::vector<Task> tasks;
  for (int t = 0; t < 340; ++t) {
    Task task;
    task.bins = 1;
    const std::size_t c = 30 + rng.uniform_int(71);
    Eigen::MatrixXd k(c, c);
    std::vector<UnitVec3> locs;
    for (std::size_t i = 0; i < c; ++i) locs.push_back(random_unit(rng));
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j)
        k(i, j) = std::exp(-2 * beta_star * (1 - locs[i].dot(locs[j]))) + (i == j ? 1e-4 : 0.0);
    const Eigen::MatrixXd l = k.llt().matrixL();
    Eigen::MatrixXd z(c, 4);
    for (std::size_t i = 0; i < c; ++i)
      for (int p = 0; p < 4; ++p) z(i, p) = rng.normal();
    const Eigen::MatrixXd y = l * z;
    for (std::size_t i = 0; i < c; ++i)
      task.context.push_back({locs[i], {Complex(y(i, 0), y(i, 1)), Complex(y(i, 2), y(i, 3))}, i});
    tasks.push_back(task);
  }
  const auto start = std::chrono::steady_clock::now();
  const auto res = gp_fit_beta(tasks, GpHyper::uniform(1, 1.0));
  MESSAGE("fit time " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s");
  CHECK(res.tasks_used == 340);
  for (std::size_t q = 0; q < 4; ++q) {
    CHECK(std::abs(res.hyper.beta[q] - beta_star) < 0.2 * beta_star);
    CHECK(res.lml_final[q] >= res.lml_init[q]);
  }
}

TEST_CASE("GP fit degenerate cases") {
  RandomStream rng(9);
  std::vector<Task> tasks(5);
  for (auto& t : tasks) {
    t.bins = 2;
    t.context = random_context(12, 2, rng);
    for (auto& d : t.context) d.features[1] = Complex(0, d.features[1].imag());
    for (auto& d : t.context) d.features[0] = Complex(0, 0);
  }
  const auto init = GpHyper::uniform(2, 3.0);
  GpFitOptions opt;
  opt.iterations = 20;
  const auto res = gp_fit_beta(tasks, init, opt);
  CHECK(res.hyper.at(0, 0, 0) == 3.0);  // ear 0 bin 0 is zero in both parts
  CHECK(res.hyper.at(0, 1, 0) == 3.0);
  CHECK(res.hyper.at(0, 0, 1) == 3.0);  // real part of bin 1 is zero
  for (std::size_t q = 0; q < 8; ++q) CHECK(res.lml_final[q] >= res.lml_init[q]);
  CHECK_THROWS_AS(gp_fit_beta(std::vector<Task>{}, init), ArgumentError);
}
