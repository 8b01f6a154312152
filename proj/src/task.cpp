#include "hrtfnp/task.hpp"

#include <algorithm>
#include <set>

#include "binary_io.hpp"
#include "hrtfnp/errors.hpp"
#include "json.hpp"

namespace hrtfnp {

std::vector<Complex> swap_ears(const std::vector<Complex>& features, std::size_t bins) {
  std::vector<Complex> out(features.size());
  std::copy(features.begin() + static_cast<std::ptrdiff_t>(bins), features.end(), out.begin());
  std::copy(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(bins),
            out.begin() + static_cast<std::ptrdiff_t>(bins));
  return out;
}

DataPoint make_point(const AlignedSet& set, std::size_t p) {
  DataPoint d;
  d.location = set.positions[p];
  d.index = p;
  const auto first = set.spectra.begin() + static_cast<std::ptrdiff_t>(p * 2 * set.bins());
  d.features.assign(first, first + static_cast<std::ptrdiff_t>(2 * set.bins()));
  return d;
}

Task sample_task(const AlignedSet& set, const SamplerConfig& cfg, RandomStream& rng, bool train_mode) {
  if (!(cfg.p_irregular >= 0.0 && cfg.p_irregular <= 1.0) || !(cfg.p_mirror >= 0.0 && cfg.p_mirror <= 1.0))
    throw ArgumentError("sampler probabilities must lie in [0, 1]");
  Task t;
  t.bins = set.bins();
  t.subject_id = set.subject_id;
  const std::size_t c =
      cfg.fixed_context ? *cfg.fixed_context : static_cast<std::size_t>(rng.uniform_int(cfg.max_context + 1));
  t.requested_context = c;
  t.irregular = train_mode && rng.bernoulli(cfg.p_irregular);
  std::vector<UnitVec3> grid;
  if (t.irregular) {
    for (std::size_t i = 0; i < c; ++i) grid.push_back(random_unit(rng));
  } else {
    grid = approx_uniform_grid(c);
  }
  const Rotation3 rot = random_rotation(rng);
  std::set<std::size_t> chosen;
  for (const auto& g : grid) chosen.insert(nearest_index(rot.apply(g), set.positions));
  for (std::size_t p = 0; p < set.size(); ++p) {
    if (chosen.count(p))
      t.context.push_back(make_point(set, p));
    else
      t.target.push_back(make_point(set, p));
  }
  if (train_mode && rng.bernoulli(cfg.p_mirror)) t = mirror_task(t);
  return t;
}

Task mirror_task(const Task& t) {
  Task m = t;
  m.mirrored = !t.mirrored;
  for (auto* list : {&m.context, &m.target})
    for (auto& d : *list) {
      d.location = mirror_median(d.location);
      d.features = swap_ears(d.features, t.bins);
    }
  return m;
}

TaskStream::TaskStream(std::vector<std::shared_ptr<const AlignedSet>> subjects, SamplerConfig cfg,
                       std::uint64_t stream_id, bool train_mode)
    : subjects_(std::move(subjects)), cfg_(cfg), stream_id_(stream_id), train_mode_(train_mode) {
  if (subjects_.empty()) throw ArgumentError("task stream needs at least one subject");
}

Task TaskStream::at(std::uint64_t step) const {
  RandomStream rng = RandomStream::derive(cfg_.seed, stream_id_, step);
  const auto& set = *subjects_[rng.uniform_int(subjects_.size())];
  return sample_task(set, cfg_, rng, train_mode_);
}

void save_task(const std::string& path, const Task& task, double fs) {
  AlignedSet a;
  a.subject_id = task.subject_id;
  a.fs = fs;
  a.taps = 2 * (task.bins - 1);
  nlohmann::ordered_json meta;
  meta["subject_id"] = task.subject_id;
  meta["requested_context"] = task.requested_context;
  meta["irregular"] = task.irregular;
  meta["mirrored"] = task.mirrored;
  std::vector<std::size_t> ci, ti;
  for (const auto* list : {&task.context, &task.target})
    for (const auto& d : *list) {
      a.positions.push_back(d.location);
      a.delays.push_back({0.0, 0.0});
      a.spectra.insert(a.spectra.end(), d.features.begin(), d.features.end());
      (list == &task.context ? ci : ti).push_back(d.index);
    }
  if (a.positions.empty()) throw ArgumentError("cannot dump a task without points");
  meta["context_indices"] = ci;
  meta["target_indices"] = ti;
  save_container(path, a);
  const std::string text = meta.dump(2) + "\n";
  detail::write_file(path + ".json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

Task load_task(const std::string& path) {
  const auto a = load_aligned_set(path);
  const auto bytes = detail::read_file(path + ".json");
  Task t;
  std::vector<std::size_t> ci, ti;
  try {
    const auto meta = nlohmann::json::parse(bytes.begin(), bytes.end());
    t.subject_id = meta.value("subject_id", a.subject_id);
    t.requested_context = meta.value("requested_context", std::size_t{0});
    t.irregular = meta.value("irregular", false);
    t.mirrored = meta.value("mirrored", false);
    ci = meta.at("context_indices").get<std::vector<std::size_t>>();
    ti = meta.at("target_indices").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ".json: " + e.what());
  }
  t.bins = a.bins();
  if (ci.size() + ti.size() != a.size()) throw DataError(path + ": index lists do not match the container");
  for (std::size_t p = 0; p < a.size(); ++p) {
    DataPoint d = make_point(a, p);
    if (p < ci.size()) {
      d.index = ci[p];
      t.context.push_back(std::move(d));
    } else {
      d.index = ti[p - ci.size()];
      t.target.push_back(std::move(d));
    }
  }
  return t;
}

}  // namespace hrtfnp
