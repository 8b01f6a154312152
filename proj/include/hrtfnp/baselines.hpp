#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hrtfnp/prediction.hpp"
#include "hrtfnp/task.hpp"

namespace hrtfnp::baseline {

using FeatureRows = std::vector<std::vector<Complex>>;

struct KernelParams {
  double beta = 1.0;
};

/// exp(-2 beta (1 - x1 . x2)).
double spherical_gaussian(const UnitVec3& x1, const UnitVec3& x2, KernelParams k);

// --- barycentric ---------------------------------------------------------

/// Features at each query as the barycentric combination over the enclosing
/// Delaunay face of the context locations. Throws ArgumentError for fewer
/// than 4 context points and GeometryError for a degenerate hull or a query
/// outside the triangulated region.
FeatureRows barycentric_interpolate(std::span<const DataPoint> context, std::span<const UnitVec3> queries);

/// Same as barycentric_interpolate where it is defined. Otherwise: no
/// context gives zeros, 1 to 3 points or a coplanar set give the nearest
/// context point, and a query outside a hemisphere-bound triangulation uses
/// the closest face with clamped, renormalized weights.
FeatureRows barycentric_predict(std::span<const DataPoint> context, std::span<const UnitVec3> queries);

// --- thin-plate spherical spline ------------------------------------------

inline constexpr int kSplineTruncation = 1000;

/// sum_{l=1}^{truncation} (2l+1) / (4 pi (l(l+1))^2) P_l(t), Kahan summed.
double spline_kernel(double t, int truncation = kSplineTruncation);

struct SplineSystem {
  int truncation = kSplineTruncation;
  std::size_t width = 0;  // features per point
  std::vector<UnitVec3> locations;
  Eigen::MatrixXd gram;      // C x C kernel matrix
  Eigen::MatrixXcd weights;  // C x width
  Eigen::RowVectorXcd constant;
  double rcond = 0.0;
};

/// Exact interpolant s(x) = sum_c w_c R(x . x_c) + d with sum_c w_c = 0.
/// Throws ArgumentError for an empty context and ConditioningError for
/// duplicate locations or a numerically singular system.
SplineSystem spline_fit(std::span<const DataPoint> context, int truncation = kSplineTruncation);
FeatureRows spline_eval(const SplineSystem& sys, std::span<const UnitVec3> queries);

/// Fit and evaluate; an empty context predicts zeros.
FeatureRows spline_predict(std::span<const DataPoint> context, std::span<const UnitVec3> queries,
                           int truncation = kSplineTruncation);

// --- Gaussian process -----------------------------------------------------

inline constexpr double kGpNoise = 1e-4;

/// Precision per ear, part (0 real, 1 imaginary) and bin.
struct GpHyper {
  double noise = kGpNoise;
  std::size_t bins = 0;
  std::vector<double> beta;  // [(ear * 2 + part) * bins + f]

  static GpHyper uniform(std::size_t bins, double beta);
  double& at(std::size_t ear, std::size_t part, std::size_t f) { return beta[(ear * 2 + part) * bins + f]; }
  double at(std::size_t ear, std::size_t part, std::size_t f) const { return beta[(ear * 2 + part) * bins + f]; }

  /// {"noise": 1e-4, "beta": [ear][part][bin]}
  std::string to_json() const;
  /// Throws DataError on malformed input or non-positive values.
  static GpHyper from_json(const std::string& text);
  static GpHyper load(const std::string& path);
  void save(const std::string& path) const;
};

struct GpPosterior {
  std::size_t bins = 0;
  std::vector<std::vector<Complex>> mean;     // [query][ear * F + f]
  std::vector<std::vector<double>> variance;  // [query][(ear * 2 + part) * F + f], latent (noise-free)
};

/// Independent GP posterior per (ear, part, bin). An empty context returns
/// the prior. Throws ConditioningError when Cholesky fails even with 1e-10
/// jitter.
GpPosterior gp_predict(std::span<const DataPoint> context, std::span<const UnitVec3> queries, const GpHyper& hyper);

/// Predictive distribution of noisy observations: stddev = sqrt(var + noise).
std::vector<Prediction> gp_predictions(const GpPosterior& post, double noise);

/// Log marginal likelihood of one (ear, part, bin) column of a context set,
/// and its derivative with respect to log beta.
struct LmlValue {
  double value = 0.0;
  double dlog_beta = 0.0;
};
LmlValue gp_log_marginal_likelihood(std::span<const DataPoint> context, std::size_t ear, std::size_t part,
                                    std::size_t f, double beta, double noise);

struct GpFitOptions {
  std::size_t iterations = 200;
  double step = 0.1;
  /// Warm start on a shared log-beta grid before the ascent.
  bool grid_warm_start = true;
  /// Stop once the accepted log-beta update is below this.
  double tolerance = 1e-4;
};

struct GpFitResult {
  GpHyper hyper;
  /// Mean log marginal likelihood per context point, per problem.
  std::vector<double> lml_init, lml_final;
  std::size_t tasks_used = 0;
};

/// Fits every beta by gradient ascent on log beta of the mean (per context
/// point) log marginal likelihood over the tasks' context sets. Problems
/// whose context features are all zero keep their initial value. Throws
/// ArgumentError on an empty task list and NumericError naming the bin on a
/// non-finite likelihood.
GpFitResult gp_fit_beta(std::span<const Task> tasks, const GpHyper& init, const GpFitOptions& opt = {});

}  // namespace hrtfnp::baseline
