#pragma once

// Spherical convolutional conditional neural process.
//
// Pipeline per task: first set convolution onto an equiangular grid (right
// ear mirrored), point-wise resize to M channels, residual hybrid
// frequency/zonal CNN, second set convolution at the targets (right half of
// the channels read at the mirrored target), residual point-wise MLP and a
// Gaussian head with a risen-softplus scale.
//
// Grid fields are tensors of shape (G*G, F, C). The 8 input channels are
// [Re dL, Re sL, Re dR, Re sR, Im dL, Im sL, Im dR, Im sR]; head outputs are
// [mu re, mu im, sigma' re, sigma' im] for the left ear followed by the same
// four for the right ear.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hrtfnp/prediction.hpp"
#include "hrtfnp/spherical_harmonics.hpp"
#include "hrtfnp/task.hpp"
#include "hrtfnp/tensor.hpp"

namespace hrtfnp::model {

enum class Activation { kRelu, kSoftplus };

struct ModelConfig {
  std::size_t grid = 32;
  int bandwidth = 15;
  std::size_t channels = 32;
  std::size_t cnn_blocks = 4;
  std::size_t mlp_blocks = 3;
  std::size_t freq_kernel = 3;
  std::size_t anchors = 4;
  double sigma_floor = 0.01;
  std::size_t bins = 5;
  Activation activation = Activation::kRelu;
  /// Tie the weights acting on the two ear halves so the network commutes
  /// with the ear swap.
  bool ear_symmetric = true;

  /// Throws ArgumentError on any violated invariant.
  void validate() const;

  std::string to_json() const;
  /// Throws DataError on unknown keys, bad types or violated invariants.
  static ModelConfig from_json(const std::string& text);

  static ModelConfig micro(std::size_t bins = 5);
};

double risen_softplus(double nu, double sigma_floor);

/// Sum over all 2 x F x 2 real components of log N(y; mu, sigma^2), real
/// and imaginary parts scored against their own scale.
double predictive_log_density(const std::vector<Complex>& y, const Prediction& pred);

/// Swaps the ear halves of a prediction.
Prediction swap_ears(const Prediction& p, std::size_t bins);

class SConvCnp {
 public:
  /// Parameters drawn from `seed`.
  SConvCnp(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  const sh::EquiangularGrid& grid() const noexcept { return grid_; }

  /// Trainable leaves in a fixed order.
  ag::NamedTensors& params() noexcept { return params_; }
  const ag::NamedTensors& params() const noexcept { return params_; }
  ag::Tensor& param(const std::string& name);
  const ag::Tensor& param(const std::string& name) const;
  std::size_t parameter_count() const;

  /// Replaces parameter values from an archive; names and shapes must match
  /// exactly (ShapeError / DataError otherwise).
  void load_params(const ag::NamedTensors& values);

  /// (G*G, F, 8) field.
  ag::Tensor first_setconv(const std::vector<DataPoint>& context) const;
  /// (G*G, F, 8) -> (G*G, F, M).
  ag::Tensor resize_in(const ag::Tensor& field) const;
  /// One residual block x + conv(act(x)).
  ag::Tensor cnn_block(const ag::Tensor& x, std::size_t block) const;
  /// The hybrid convolution of one block without activation or residual.
  ag::Tensor hybrid_conv(const ag::Tensor& x, std::size_t block) const;
  ag::Tensor cnn_forward(const ag::Tensor& x) const;
  /// (G*G, F, M) -> (T, F, M).
  ag::Tensor second_setconv(const ag::Tensor& z, const std::vector<UnitVec3>& targets) const;
  /// (T, F, M) -> (T, F, 8) head output before the scale nonlinearity.
  ag::Tensor mlp_head(const ag::Tensor& q) const;

  struct Output {
    ag::Tensor mean;   // (T, F, 4): [Re L, Im L, Re R, Im R]
    ag::Tensor scale;  // same layout, every entry >= sigma_floor
  };
  Output forward(const std::vector<DataPoint>& context, const std::vector<UnitVec3>& targets) const;

  /// Mean negative log density over the task's targets.
  ag::Tensor loss(const Task& task) const;
  /// Predictions without recording a graph.
  std::vector<Prediction> predict(const std::vector<DataPoint>& context, const std::vector<UnitVec3>& targets) const;

 private:
  ag::Tensor& add_param(const std::string& name, const ag::Shape& shape);
  ag::Tensor dense_weight(const std::string& name, std::size_t in) const;
  ag::Tensor dense_bias(const std::string& name) const;
  ag::Tensor conv_weights(std::size_t block) const;
  ag::Tensor act(const ag::Tensor& x) const;

  ModelConfig cfg_;
  sh::EquiangularGrid grid_;
  std::shared_ptr<const Eigen::MatrixXd> analysis_, synthesis_;
  std::shared_ptr<const std::vector<std::size_t>> degree_of_;
  ag::Tensor interp_t_;     // (A, L+1) anchor interpolation, transposed
  ag::Tensor degree_gain_;  // (L+1): sqrt(4 pi / (2l + 1))
  ag::NamedTensors params_;
};

/// Target locations of a task.
std::vector<UnitVec3> target_locations(const Task& task);

/// (T, F, 4) tensor of target features in head layout.
ag::Tensor target_tensor(const Task& task);

/// Mean NLL of the (T, F, 4) Gaussian output against the targets.
ag::Tensor gaussian_nll(const SConvCnp::Output& out, const ag::Tensor& y);

}  // namespace hrtfnp::model
