#pragma once

// Maximum-likelihood meta-training with Adam and validation-based selection,
// plus task-level evaluation shared by the model and the baselines.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hrtfnp/dataset.hpp"
#include "hrtfnp/metrics.hpp"
#include "hrtfnp/model.hpp"
#include "hrtfnp/task.hpp"

namespace hrtfnp::train {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter tensor in the
/// model's parameter order.
class Adam {
 public:
  Adam(const ag::NamedTensors& params, AdamConfig cfg);

  /// Applies one update from the current gradients.
  void step(ag::NamedTensors& params);

  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

  /// Moments as named tensors ("m.<name>", "v.<name>") and restoration.
  ag::NamedTensors state(const ag::NamedTensors& params) const;
  void restore(const ag::NamedTensors& state, const ag::NamedTensors& params, std::uint64_t steps);

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch = 4;
  AdamConfig adam;
  std::size_t val_interval = 100;  // 0 disables validation
  std::uint64_t seed = 0;
  /// When set, `best.ckpt` and `last.state` are written under it.
  std::string out_dir;
  /// Write the resumable state every this many steps (0: only at the end).
  std::size_t state_interval = 0;

  void validate() const;
};

struct LogRow {
  std::size_t step = 0;
  double train_nll = 0.0;
  std::optional<double> val_nll;
  double wall_time = 0.0;  // seconds since the start of this run
};

struct TrainResult {
  std::vector<LogRow> log;
  double best_val_nll = 0.0;  // +inf when validation never ran
  std::size_t best_step = 0;
  ag::NamedTensors best_params;
  bool halted = false;  // non-finite loss or parameters
  std::string diagnostic;
};

/// Mean NLL of a task batch; gradients are accumulated into the parameters.
double train_step_loss(const model::SConvCnp& model, const std::vector<Task>& batch);

/// Where a run continues from: the next step index and the best validation
/// result so far.
struct TrainProgress {
  std::size_t next_step = 0;
  double best_val_nll = 0.0;  // +inf before any validation
  std::size_t best_step = 0;
  ag::NamedTensors best_params;

  static TrainProgress fresh();
};

/// Runs steps [progress.next_step, cfg.steps); step k consumes stream tasks
/// [k * batch, (k + 1) * batch). On a non-finite loss or update the
/// parameters are reset to their last finite values and training stops.
TrainResult fit(model::SConvCnp& model, Adam& adam, TaskStream& stream, const std::vector<Task>& val_tasks,
                  const TrainConfig& cfg, TrainProgress progress = TrainProgress::fresh());

/// Mean over tasks of the per-target mean NLL, without recording a graph.
double mean_nll(const model::SConvCnp& model, const std::vector<Task>& tasks);

// Checkpoint files: `<path>` holds f32 parameters and `<path>.json` the
// model config, seed, step and validation NLL.
struct CheckpointInfo {
  model::ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double val_nll = 0.0;
};
void save_checkpoint(const std::string& path, const ag::NamedTensors& params, const CheckpointInfo& info);
/// Model rebuilt from the sidecar config with the archived parameters.
model::SConvCnp load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr);

// Resumable training state in f64: parameters, Adam moments, best
// parameters and counters. Resuming reproduces the uninterrupted run bit
// for bit in single-thread mode.
void save_state(const std::string& path, const model::SConvCnp& model, const Adam& adam, const TrainProgress& p);
/// Restores parameters and moments in place; the model must have the
/// state's architecture.
TrainProgress load_state(const std::string& path, model::SConvCnp& model, Adam& adam);

// --- evaluation ------------------------------------------------------------

using Predictor = std::function<std::vector<Prediction>(const Task&)>;

struct TaskReport {
  std::size_t task = 0;
  std::string subject_id;
  std::size_t context = 0;
  std::size_t targets = 0;
  std::optional<double> nll;  // mean over targets; absent for point predictors
  std::optional<double> lre_db, lmd_db, lsd_db;  // means over usable features / targets
  std::size_t excluded = 0;                      // features skipped for zero magnitude
};

struct FeatureRow {
  std::size_t task = 0, target = 0, ear = 0, bin = 0;
  std::optional<double> lre_db, lmd_db;
};

struct EvalReport {
  std::vector<TaskReport> tasks;
  std::vector<FeatureRow> features;
  std::vector<metrics::CalibrationPair> calibration;
  std::optional<double> mean_nll, mean_lre_db, mean_lmd_db, mean_lsd_db;
};

/// Scores predictions per task. Metrics compare spectra after adding `mean`
/// back at each target's position index when given; the NLL is always on
/// the features as stored in the task.
EvalReport evaluate(const Predictor& predict, const std::vector<Task>& tasks, const MeanEnvelope* mean = nullptr,
                    bool keep_feature_rows = false);

Predictor model_predictor(const model::SConvCnp& model);

/// sqrt of the mean square of every real component of every target.
double fitted_constant_sigma(const std::vector<Task>& tasks);
/// Predicts zero with a constant scale sigma for every component.
Predictor zero_predictor(double sigma);

}  // namespace hrtfnp::train
