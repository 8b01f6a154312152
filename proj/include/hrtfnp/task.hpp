#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hrtfnp/dataset.hpp"
#include "hrtfnp/random.hpp"
#include "hrtfnp/sphere_geom.hpp"

namespace hrtfnp {

/// One location with its residual spectra, features[ear * F + f].
struct DataPoint {
  UnitVec3 location;
  std::vector<Complex> features;
  std::size_t index = 0;  // position index in the source set
};

/// Context/target episode drawn from one subject.
struct Task {
  std::size_t bins = 0;
  std::vector<DataPoint> context;
  std::vector<DataPoint> target;
  std::size_t requested_context = 0;  // C before collisions were dropped
  bool irregular = false;
  bool mirrored = false;
  std::string subject_id;
};

struct SamplerConfig {
  std::size_t max_context = 100;
  /// When set, every task requests exactly this many context points.
  std::optional<std::size_t> fixed_context;
  double p_irregular = 0.5;
  double p_mirror = 0.5;
  std::uint64_t seed = 0;
};

/// Draws C uniformly in [0, max_context] (or takes fixed_context), places C points (an approximately
/// uniform grid, or in train mode with probability p_irregular iid uniform
/// points), rotates them uniformly at random, snaps each to the nearest set
/// position (repeats dropped) and uses the remaining positions as targets.
/// In train mode the task is mirrored with probability p_mirror. Context and
/// target are ordered by position index.
Task sample_task(const AlignedSet& set, const SamplerConfig& cfg, RandomStream& rng, bool train_mode);

/// Negates y of every location and swaps the ear channels. Involution.
Task mirror_task(const Task& t);

/// Swaps the two ear halves of a feature vector laid out as [ear][f].
std::vector<Complex> swap_ears(const std::vector<Complex>& features, std::size_t bins);

/// Data point for position p of a set.
DataPoint make_point(const AlignedSet& set, std::size_t p);

/// Pull-based task source. Task k depends only on (seed, stream id, k), so
/// any task can be regenerated in isolation.
class TaskStream {
 public:
  TaskStream(std::vector<std::shared_ptr<const AlignedSet>> subjects, SamplerConfig cfg, std::uint64_t stream_id,
             bool train_mode);

  Task at(std::uint64_t step) const;
  Task next() { return at(step_++); }

  std::uint64_t position() const noexcept { return step_; }
  void seek(std::uint64_t step) noexcept { step_ = step; }

 private:
  std::vector<std::shared_ptr<const AlignedSet>> subjects_;
  SamplerConfig cfg_;
  std::uint64_t stream_id_;
  bool train_mode_;
  std::uint64_t step_ = 0;
};

/// Debug dump: a kind-1 container holding the context points followed by the
/// target points (zero delays), plus `<path>.json` with the index lists.
void save_task(const std::string& path, const Task& task, double fs);
Task load_task(const std::string& path);

}  // namespace hrtfnp
