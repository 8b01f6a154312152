#include "hrtfnp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "binary_io.hpp"
#include "hrtfnp/errors.hpp"
#include "hrtfnp/parallel.hpp"
#include "json.hpp"

namespace hrtfnp::baseline {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLog2Pi = 1.8378770664093453;

std::vector<UnitVec3> locations_of(std::span<const DataPoint> context) {
  std::vector<UnitVec3> out;
  out.reserve(context.size());
  for (const auto& d : context) out.push_back(d.location);
  return out;
}

std::size_t width_of(std::span<const DataPoint> context) {
  const std::size_t w = context.front().features.size();
  for (const auto& d : context)
    if (d.features.size() != w) throw ShapeError("context points carry different feature counts");
  return w;
}

std::vector<Complex> combine(std::span<const DataPoint> context, const std::array<std::size_t, 3>& idx,
                             const std::array<double, 3>& w) {
  std::vector<Complex> out(context[idx[0]].features.size());
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * context[idx[k]].features[i];
  return out;
}

// Cone coordinates of x in the basis (a, b, c), clamped to the triangle and
// renormalized.
std::array<double, 3> clamped_cone_weights(const UnitVec3& x, const SphericalTriangle& t, double* min_coord) {
  Eigen::Matrix3d m;
  m << t.a.x(), t.b.x(), t.c.x(), t.a.y(), t.b.y(), t.c.y(), t.a.z(), t.b.z(), t.c.z();
  const Eigen::Vector3d w = m.partialPivLu().solve(Eigen::Vector3d(x.x(), x.y(), x.z()));
  const double s = w.sum();
  *min_coord = w.minCoeff() / (std::abs(s) > 0 ? std::abs(s) : 1.0);
  std::array<double, 3> c{std::max(0.0, w[0]), std::max(0.0, w[1]), std::max(0.0, w[2])};
  const double total = c[0] + c[1] + c[2];
  if (total > 0)
    for (auto& v : c) v /= total;
  else
    c = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  return c;
}

FeatureRows nearest_neighbour(std::span<const DataPoint> context, std::span<const UnitVec3> queries) {
  const auto locs = locations_of(context);
  FeatureRows out;
  for (const auto& q : queries) out.push_back(context[nearest_index(q, locs)].features);
  return out;
}

}  // namespace

double spherical_gaussian(const UnitVec3& x1, const UnitVec3& x2, KernelParams k) {
  return std::exp(-2.0 * k.beta * (1.0 - x1.dot(x2)));
}

FeatureRows barycentric_interpolate(std::span<const DataPoint> context, std::span<const UnitVec3> queries) {
  if (context.size() < 4) throw ArgumentError("barycentric interpolation needs at least 4 context points");
  width_of(context);
  const SphericalTriangulation tri(locations_of(context));
  FeatureRows out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    const auto f = tri.locate(q);
    if (!f) throw GeometryError("query direction is not covered by the context triangulation");
    const auto w = barycentric_coords(q, tri.triangle(*f));
    out.push_back(combine(context, *f, {w.b1, w.b2, w.b3}));
  }
  return out;
}

FeatureRows barycentric_predict(std::span<const DataPoint> context, std::span<const UnitVec3> queries) {
  if (context.empty()) return FeatureRows(queries.size());
  if (context.size() < 4) return nearest_neighbour(context, queries);
  std::optional<SphericalTriangulation> tri;
  try {
    tri.emplace(locations_of(context));
  } catch (const GeometryError&) {
    return nearest_neighbour(context, queries);
  }
  FeatureRows out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    if (const auto f = tri->locate(q)) {
      const auto w = barycentric_coords(q, tri->triangle(*f));
      out.push_back(combine(context, *f, {w.b1, w.b2, w.b3}));
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    std::array<double, 3> best_w{};
    SphericalTriangulation::Face best_f{};
    for (const auto& f : tri->faces()) {
      double m = 0;
      const auto w = clamped_cone_weights(q, tri->triangle(f), &m);
      if (m > best) {
        best = m;
        best_w = w;
        best_f = f;
      }
    }
    out.push_back(combine(context, best_f, best_w));
  }
  return out;
}

double spline_kernel(double t, int truncation) {
  t = std::clamp(t, -1.0, 1.0);
  double p_prev = 1.0, p = t;  // P_0, P_1
  double sum = 0.0, comp = 0.0;
  for (int l = 1; l <= truncation; ++l) {
    if (l > 1) {
      const double next = ((2.0 * l - 1.0) * t * p - (l - 1.0) * p_prev) / l;
      p_prev = p;
      p = next;
    }
    const double ll = static_cast<double>(l) * (l + 1.0);
    const double term = (2.0 * l + 1.0) / (4.0 * kPi * ll * ll) * p;
    const double y = term - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  return sum;
}

SplineSystem spline_fit(std::span<const DataPoint> context, int truncation) {
  if (context.empty()) throw ArgumentError("spline fit needs at least one context point");
  if (truncation < 1) throw ArgumentError("spline truncation must be positive");
  const std::size_t c = context.size();
  SplineSystem sys;
  sys.truncation = truncation;
  sys.width = width_of(context);
  sys.locations = locations_of(context);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i + 1; j < c; ++j) {
      const auto& a = sys.locations[i];
      const auto& b = sys.locations[j];
      const double cx = a.y() * b.z() - a.z() * b.y(), cy = a.z() * b.x() - a.x() * b.z(),
                   cz = a.x() * b.y() - a.y() * b.x();
      if (a.dot(b) > 0 && std::sqrt(cx * cx + cy * cy + cz * cz) < 1e-12)
        throw ConditioningError("duplicate spline context locations", std::numeric_limits<double>::infinity());
    }
  sys.gram.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i; j < c; ++j) {
      const double v = spline_kernel(sys.locations[i].dot(sys.locations[j]), truncation);
      sys.gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      sys.gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  const auto n = static_cast<Eigen::Index>(c + 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  a.topLeftCorner(n - 1, n - 1) = sys.gram;
  a.col(n - 1).head(n - 1).setOnes();
  a.row(n - 1).head(n - 1).setOnes();
  const auto w = static_cast<Eigen::Index>(sys.width);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2 * w);
  for (std::size_t i = 0; i < c; ++i)
    for (Eigen::Index k = 0; k < w; ++k) {
      rhs(static_cast<Eigen::Index>(i), k) = context[i].features[static_cast<std::size_t>(k)].real();
      rhs(static_cast<Eigen::Index>(i), w + k) = context[i].features[static_cast<std::size_t>(k)].imag();
    }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  sys.rcond = lu.rcond();
  if (!(sys.rcond > 1e-13)) throw ConditioningError("spline system is numerically singular", 1.0 / sys.rcond);
  const Eigen::MatrixXd sol = lu.solve(rhs);
  const double scale = std::max(rhs.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double residual = (a * sol - rhs).cwiseAbs().maxCoeff() / scale;
  if (!(residual < 1e-8)) throw ConditioningError("spline solve residual too large", 1.0 / sys.rcond);
  sys.weights.resize(n - 1, w);
  sys.constant.resize(w);
  for (Eigen::Index k = 0; k < w; ++k) {
    for (Eigen::Index i = 0; i < n - 1; ++i) sys.weights(i, k) = Complex(sol(i, k), sol(i, w + k));
    sys.constant(k) = Complex(sol(n - 1, k), sol(n - 1, w + k));
  }
  return sys;
}

FeatureRows spline_eval(const SplineSystem& sys, std::span<const UnitVec3> queries) {
  FeatureRows out(queries.size());
  const auto c = static_cast<Eigen::Index>(sys.locations.size());
  Eigen::RowVectorXd kq(c);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (Eigen::Index i = 0; i < c; ++i)
      kq(i) = spline_kernel(queries[q].dot(sys.locations[static_cast<std::size_t>(i)]), sys.truncation);
    const Eigen::RowVectorXcd v = kq.cast<Complex>() * sys.weights + sys.constant;
    out[q].assign(v.data(), v.data() + v.size());
  }
  return out;
}

FeatureRows spline_predict(std::span<const DataPoint> context, std::span<const UnitVec3> queries, int truncation) {
  if (context.empty()) return FeatureRows(queries.size());
  return spline_eval(spline_fit(context, truncation), queries);
}

// --- GP -------------------------------------------------------------------

GpHyper GpHyper::uniform(std::size_t bins, double beta) {
  if (!(beta > 0) || !std::isfinite(beta)) throw ArgumentError("beta must be positive and finite");
  GpHyper h;
  h.bins = bins;
  h.beta.assign(4 * bins, beta);
  return h;
}

std::string GpHyper::to_json() const {
  nlohmann::ordered_json j;
  j["noise"] = noise;
  nlohmann::json b = nlohmann::json::array();
  for (std::size_t e = 0; e < 2; ++e) {
    nlohmann::json ear = nlohmann::json::array();
    for (std::size_t p = 0; p < 2; ++p) {
      std::vector<double> row(beta.begin() + static_cast<std::ptrdiff_t>((e * 2 + p) * bins),
                              beta.begin() + static_cast<std::ptrdiff_t>((e * 2 + p + 1) * bins));
      ear.push_back(row);
    }
    b.push_back(ear);
  }
  j["beta"] = b;
  return j.dump(2) + "\n";
}

GpHyper GpHyper::from_json(const std::string& text) {
  GpHyper h;
  try {
    const auto j = nlohmann::json::parse(text);
    h.noise = j.at("noise").get<double>();
    const auto& b = j.at("beta");
    if (!b.is_array() || b.size() != 2) throw DataError("GP beta must be a [2][2][bins] array");
    for (std::size_t e = 0; e < 2; ++e) {
      if (!b[e].is_array() || b[e].size() != 2) throw DataError("GP beta must be a [2][2][bins] array");
      for (std::size_t p = 0; p < 2; ++p) {
        const auto row = b[e][p].get<std::vector<double>>();
        if (e == 0 && p == 0) h.bins = row.size();
        if (row.size() != h.bins || h.bins == 0) throw DataError("GP beta rows differ in length");
        h.beta.insert(h.beta.end(), row.begin(), row.end());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed GP hyperparameter JSON: ") + e.what());
  }
  if (!(h.noise > 0) || !std::isfinite(h.noise)) throw DataError("GP noise must be positive");
  for (double v : h.beta)
    if (!(v > 0) || !std::isfinite(v)) throw DataError("GP beta values must be positive and finite");
  return h;
}

GpHyper GpHyper::load(const std::string& path) {
  const auto bytes = detail::read_file(path);
  return from_json(std::string(bytes.begin(), bytes.end()));
}

void GpHyper::save(const std::string& path) const {
  const auto text = to_json();
  detail::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

namespace {

Eigen::MatrixXd distance_matrix(const std::vector<UnitVec3>& a, const std::vector<UnitVec3>& b) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0 - a[i].dot(b[j]);
  return d;
}

Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& k0, double noise) {
  Eigen::MatrixXd k = k0;
  k.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) return llt;
  k.diagonal().array() += 1e-10;
  llt.compute(k);
  if (llt.info() == Eigen::Success) return llt;
  throw ConditioningError("GP covariance is not positive definite", std::numeric_limits<double>::infinity());
}

double feature_part(const Complex& v, std::size_t part) { return part == 0 ? v.real() : v.imag(); }

// Column of observations for problem (ear, part, f).
Eigen::VectorXd observations(std::span<const DataPoint> context, std::size_t ear, std::size_t part, std::size_t f,
                             std::size_t bins) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(context.size()));
  for (std::size_t i = 0; i < context.size(); ++i)
    y(static_cast<Eigen::Index>(i)) = feature_part(context[i].features[ear * bins + f], part);
  return y;
}

}  // namespace

GpPosterior gp_predict(std::span<const DataPoint> context, std::span<const UnitVec3> queries, const GpHyper& hyper) {
  const std::size_t bins = hyper.bins;
  GpPosterior post;
  post.bins = bins;
  post.mean.assign(queries.size(), std::vector<Complex>(2 * bins));
  post.variance.assign(queries.size(), std::vector<double>(4 * bins, 1.0));
  if (context.empty()) return post;
  if (width_of(context) != 2 * bins) throw ShapeError("context feature count does not match the GP bins");

  const auto locs = locations_of(context);
  const std::vector<UnitVec3> qs(queries.begin(), queries.end());
  const Eigen::MatrixXd dcc = distance_matrix(locs, locs);
  const Eigen::MatrixXd dqc = distance_matrix(qs, locs);

  // Problems sharing a beta share the factorization and the variance.
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t p = 0; p < hyper.beta.size(); ++p) groups[hyper.beta[p]].push_back(p);
  std::vector<std::pair<double, std::vector<std::size_t>>> work(groups.begin(), groups.end());

  // Each problem writes only its own slot of `parts`.
  std::vector<std::vector<double>> parts(queries.size(), std::vector<double>(4 * bins, 0.0));
  parallel_for(work.size(), [&](std::size_t g) {
    const double beta = work[g].first;
    const Eigen::MatrixXd k0 = (-2.0 * beta * dcc.array()).exp().matrix();
    const auto llt = factor(k0, hyper.noise);
    const Eigen::MatrixXd kq = (-2.0 * beta * dqc.array()).exp().matrix();  // Q x C
    const Eigen::MatrixXd v = llt.matrixL().solve(kq.transpose());           // C x Q
    const Eigen::VectorXd var = (1.0 - v.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
    for (std::size_t p : work[g].second) {
      const std::size_t ear = p / (2 * bins), part = (p / bins) % 2, f = p % bins;
      const Eigen::VectorXd alpha = llt.solve(observations(context, ear, part, f, bins));
      const Eigen::VectorXd mean = kq * alpha;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        parts[q][p] = mean(static_cast<Eigen::Index>(q));
        post.variance[q][p] = var(static_cast<Eigen::Index>(q));
      }
    }
  });
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (std::size_t e = 0; e < 2; ++e)
      for (std::size_t f = 0; f < bins; ++f)
        post.mean[q][e * bins + f] = {parts[q][(e * 2) * bins + f], parts[q][(e * 2 + 1) * bins + f]};
  return post;
}

std::vector<Prediction> gp_predictions(const GpPosterior& post, double noise) {
  std::vector<Prediction> out(post.mean.size());
  const std::size_t bins = post.bins;
  for (std::size_t q = 0; q < out.size(); ++q) {
    out[q].mean = post.mean[q];
    out[q].stddev.resize(2 * bins);
    for (std::size_t e = 0; e < 2; ++e)
      for (std::size_t f = 0; f < bins; ++f)
        out[q].stddev[e * bins + f] = {std::sqrt(post.variance[q][(e * 2 + 0) * bins + f] + noise),
                                       std::sqrt(post.variance[q][(e * 2 + 1) * bins + f] + noise)};
  }
  return out;
}

namespace {

struct LmlAccum {
  double value = 0.0;
  double dbeta = 0.0;
};

// LML of one column and its derivative in beta, given the context distances.
LmlAccum lml_column(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, double beta, double noise) {
  const Eigen::MatrixXd k0 = (-2.0 * beta * d.array()).exp().matrix();
  const auto llt = factor(k0, noise);
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(d.rows(), d.cols()));
  const Eigen::MatrixXd dk = (-2.0 * d.array() * k0.array()).matrix();
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  LmlAccum r;
  r.value = -0.5 * y.dot(alpha) - 0.5 * logdet - 0.5 * static_cast<double>(y.size()) * kLog2Pi;
  r.dbeta = 0.5 * ((alpha * alpha.transpose() - kinv).array() * dk.array()).sum();
  return r;
}

}  // namespace

LmlValue gp_log_marginal_likelihood(std::span<const DataPoint> context, std::size_t ear, std::size_t part,
                                    std::size_t f, double beta, double noise) {
  if (context.empty()) return {};
  const std::size_t bins = width_of(context) / 2;
  const auto locs = locations_of(context);
  const auto r = lml_column(distance_matrix(locs, locs), observations(context, ear, part, f, bins), beta, noise);
  return {r.value, beta * r.dbeta};
}

GpFitResult gp_fit_beta(std::span<const Task> tasks, const GpHyper& init, const GpFitOptions& opt) {
  if (tasks.empty()) throw ArgumentError("GP fit needs at least one task");
  const std::size_t bins = init.bins;
  const std::size_t problems = 4 * bins;

  struct Prepared {
    Eigen::MatrixXd d;
    Eigen::MatrixXd y;  // C x problems
  };
  std::vector<Prepared> prep;
  double points = 0;
  for (const auto& t : tasks) {
    if (t.context.empty()) continue;
    if (width_of(t.context) != 2 * bins) throw ShapeError("task feature count does not match the GP bins");
    Prepared p;
    const auto locs = locations_of(t.context);
    p.d = distance_matrix(locs, locs);
    p.y.resize(static_cast<Eigen::Index>(t.context.size()), static_cast<Eigen::Index>(problems));
    for (std::size_t q = 0; q < problems; ++q)
      p.y.col(static_cast<Eigen::Index>(q)) = observations(t.context, q / (2 * bins), (q / bins) % 2, q % bins, bins);
    points += static_cast<double>(t.context.size());
    prep.push_back(std::move(p));
  }

  GpFitResult res;
  res.hyper = init;
  res.tasks_used = prep.size();
  res.lml_init.assign(problems, 0.0);
  res.lml_final.assign(problems, 0.0);
  if (prep.empty()) return res;

  auto name = [&](std::size_t q) {
    return "ear " + std::to_string(q / (2 * bins)) + " part " + std::to_string((q / bins) % 2) + " bin " +
           std::to_string(q % bins);
  };

  // Shared grid: one factorization per task serves every problem.
  std::vector<double> grid_beta;
  std::vector<std::vector<double>> grid_value;  // [grid][problem]
  if (opt.grid_warm_start) {
    for (int i = 0; i <= 32; ++i) grid_beta.push_back(std::exp(std::log(0.05) + i * (std::log(5000.0) - std::log(0.05)) / 32));
    grid_value.assign(grid_beta.size(), std::vector<double>(problems, 0.0));
    parallel_for(grid_beta.size(), [&](std::size_t g) {
      std::vector<double> acc(problems, 0.0);
      for (const auto& p : prep) {
        const Eigen::MatrixXd k0 = (-2.0 * grid_beta[g] * p.d.array()).exp().matrix();
        Eigen::LLT<Eigen::MatrixXd> llt;
        try {
          llt = factor(k0, init.noise);
        } catch (const ConditioningError&) {
          std::fill(acc.begin(), acc.end(), -std::numeric_limits<double>::infinity());
          break;
        }
        const Eigen::MatrixXd alpha = llt.solve(p.y);
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double c = static_cast<double>(p.y.rows());
        for (std::size_t q = 0; q < problems; ++q)
          acc[q] += -0.5 * p.y.col(static_cast<Eigen::Index>(q)).dot(alpha.col(static_cast<Eigen::Index>(q))) -
                    0.5 * logdet - 0.5 * c * kLog2Pi;
      }
      grid_value[g] = acc;
    });
  }

  parallel_for(problems, [&](std::size_t q) {
    bool all_zero = true;
    for (const auto& p : prep) all_zero = all_zero && p.y.col(static_cast<Eigen::Index>(q)).isZero(0.0);

    auto eval = [&](double log_beta) {
      const double beta = std::exp(log_beta);
      LmlAccum total;
      for (const auto& p : prep) {
        const auto r = lml_column(p.d, p.y.col(static_cast<Eigen::Index>(q)), beta, init.noise);
        total.value += r.value;
        total.dbeta += r.dbeta;
      }
      LmlValue v{total.value / points, beta * total.dbeta / points};
      if (!std::isfinite(v.value) || !std::isfinite(v.dlog_beta))
        throw NumericError("non-finite log marginal likelihood at " + name(q));
      return v;
    };

    double u = std::log(init.beta[q]);
    LmlValue cur = eval(u);
    res.lml_init[q] = cur.value;
    if (all_zero) {
      res.lml_final[q] = cur.value;
      return;
    }
    if (opt.grid_warm_start) {
      std::size_t best = 0;
      for (std::size_t g = 1; g < grid_beta.size(); ++g)
        if (grid_value[g][q] > grid_value[best][q]) best = g;
      const double ug = std::log(grid_beta[best]);
      const LmlValue start = eval(ug);
      if (start.value > cur.value) {
        u = ug;
        cur = start;
      }
    }
    for (std::size_t it = 0; it < opt.iterations; ++it) {
      double step = opt.step * cur.dlog_beta;
      bool accepted = false;
      for (int halving = 0; halving < 40 && std::abs(step) > 0; ++halving, step *= 0.5) {
        const LmlValue next = eval(u + step);
        if (next.value >= cur.value) {
          u += step;
          cur = next;
          accepted = true;
          break;
        }
      }
      if (!accepted || std::abs(step) < opt.tolerance) break;
    }
    res.hyper.beta[q] = std::exp(u);
    res.lml_final[q] = cur.value;
  });
  return res;
}

}  // namespace hrtfnp::baseline
