#include "hrtfnp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>

#include "binary_io.hpp"
#include "hrtfnp/errors.hpp"
#include "hrtfnp/parallel.hpp"
#include "json.hpp"

namespace hrtfnp::train {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ag::NamedTensors snapshot(const ag::NamedTensors& params) {
  ag::NamedTensors out;
  for (const auto& [name, t] : params) out.emplace_back(name, ag::detach(t));
  return out;
}

void assign(ag::NamedTensors& params, const ag::NamedTensors& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].second.mutable_values() = values[i].second.values();
}

bool all_finite(const ag::NamedTensors& params) {
  for (const auto& [name, t] : params)
    for (double v : t.values())
      if (!std::isfinite(v)) return false;
  return true;
}

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

Adam::Adam(const ag::NamedTensors& params, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg_.lr >= 0.0) || !(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0) ||
      !(cfg_.eps > 0.0))
    throw ArgumentError("Adam: lr >= 0, betas in [0, 1) and eps > 0 required");
  for (const auto& [name, t] : params) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Adam::step(ag::NamedTensors& params) {
  if (params.size() != m_.size()) throw ArgumentError("Adam: parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params[p].second.mutable_values();
    const auto& g = params[p].second.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[p][i] = cfg_.beta1 * m_[p][i] + (1.0 - cfg_.beta1) * g[i];
      v_[p][i] = cfg_.beta2 * v_[p][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      w[i] -= cfg_.lr * (m_[p][i] / c1) / (std::sqrt(v_[p][i] / c2) + cfg_.eps);
    }
  }
}

ag::NamedTensors Adam::state(const ag::NamedTensors& params) const {
  ag::NamedTensors out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    out.emplace_back("m." + params[p].first, ag::Tensor::from(params[p].second.shape(), m_[p]));
    out.emplace_back("v." + params[p].first, ag::Tensor::from(params[p].second.shape(), v_[p]));
  }
  return out;
}

void Adam::restore(const ag::NamedTensors& state, const ag::NamedTensors& params, std::uint64_t steps) {
  if (state.size() != 2 * params.size()) throw DataError("optimizer state does not match the parameters");
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& m = state[2 * p];
    const auto& v = state[2 * p + 1];
    if (m.first != "m." + params[p].first || v.first != "v." + params[p].first ||
        m.second.shape() != params[p].second.shape() || v.second.shape() != params[p].second.shape())
      throw DataError("optimizer state entry for '" + params[p].first + "' is missing or misshapen");
    m_[p] = m.second.values();
    v_[p] = v.second.values();
  }
  t_ = steps;
}

void TrainConfig::validate() const {
  if (steps == 0 || batch == 0) throw ArgumentError("training needs positive steps and batch size");
  if (!(adam.lr >= 0.0) || !std::isfinite(adam.lr)) throw ArgumentError("learning rate must be finite and >= 0");
}

TrainProgress TrainProgress::fresh() {
  TrainProgress p;
  p.best_val_nll = kInf;
  return p;
}

double train_step_loss(const model::SConvCnp& model, const std::vector<Task>& batch) {
  if (batch.empty()) throw ArgumentError("empty training batch");
  ag::Tensor total = model.loss(batch[0]);
  for (std::size_t i = 1; i < batch.size(); ++i) total = ag::add(total, model.loss(batch[i]));
  total = ag::scale(total, 1.0 / static_cast<double>(batch.size()));
  const double value = total.item();
  if (std::isfinite(value)) ag::backward(total);
  return value;
}

double mean_nll(const model::SConvCnp& model, const std::vector<Task>& tasks) {
  if (tasks.empty()) throw ArgumentError("mean NLL of no tasks");
  std::vector<double> v(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t i) {
    ag::NoGradGuard ng;
    v[i] = model.loss(tasks[i]).item();
  });
  return mean_of(v);
}

TrainResult fit(model::SConvCnp& model, Adam& adam, TaskStream& stream, const std::vector<Task>& val_tasks,
                  const TrainConfig& cfg, TrainProgress progress) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  TrainResult r;
  r.best_val_nll = progress.best_val_nll;
  r.best_step = progress.best_step;
  r.best_params = progress.best_params;
  auto& params = model.params();
  const bool validating = cfg.val_interval > 0 && !val_tasks.empty();
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

  auto write_state = [&](std::size_t next) {
    if (cfg.out_dir.empty()) return;
    TrainProgress p{next, r.best_val_nll, r.best_step, r.best_params};
    save_state(join(cfg.out_dir, "last.state"), model, adam, p);
  };

  for (std::size_t step = progress.next_step; step < cfg.steps; ++step) {
    stream.seek(static_cast<std::uint64_t>(step) * cfg.batch);
    std::vector<Task> batch;
    for (std::size_t b = 0; b < cfg.batch; ++b) batch.push_back(stream.next());

    const ag::NamedTensors last_good = snapshot(params);
    for (auto& [name, t] : params) t.zero_grad();
    const double loss = train_step_loss(model, batch);
    if (std::isfinite(loss)) adam.step(params);
    if (!std::isfinite(loss) || !all_finite(params)) {
      assign(params, last_good);
      r.halted = true;
      r.diagnostic = "non-finite " + std::string(std::isfinite(loss) ? "parameter update" : "training loss") +
                     " at step " + std::to_string(step + 1) + "; parameters reset to the last finite values";
      if (!cfg.out_dir.empty())
        save_checkpoint(join(cfg.out_dir, "last_good.ckpt"), params,
                        {model.config(), cfg.seed, step, r.best_val_nll});
      break;
    }

    LogRow row{step + 1, loss, std::nullopt, 0.0};
    if (validating && ((step + 1) % cfg.val_interval == 0 || step + 1 == cfg.steps)) {
      const double v = mean_nll(model, val_tasks);
      row.val_nll = v;
      if (v < r.best_val_nll) {
        r.best_val_nll = v;
        r.best_step = step + 1;
        r.best_params = snapshot(params);
        if (!cfg.out_dir.empty())
          save_checkpoint(join(cfg.out_dir, "best.ckpt"), params, {model.config(), cfg.seed, step + 1, v});
      }
    }
    row.wall_time = elapsed();
    r.log.push_back(row);
    if (cfg.state_interval > 0 && (step + 1) % cfg.state_interval == 0) write_state(step + 1);
  }
  if (!r.halted) write_state(cfg.steps);
  return r;
}

void save_checkpoint(const std::string& path, const ag::NamedTensors& params, const CheckpointInfo& info) {
  ag::save_archive(path, params);
  nlohmann::ordered_json j;
  j["model"] = nlohmann::ordered_json::parse(info.config.to_json());
  j["seed"] = info.seed;
  j["step"] = info.step;
  if (std::isfinite(info.val_nll)) j["val_nll"] = info.val_nll;
  else j["val_nll"] = nullptr;
  const std::string text = j.dump(2) + "\n";
  detail::write_file(path + ".json", std::vector<std::uint8_t>(text.begin(), text.end()));
}

model::SConvCnp load_checkpoint(const std::string& path, CheckpointInfo* info) {
  const auto bytes = detail::read_file(path + ".json");
  CheckpointInfo ci;
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    ci.config = model::ModelConfig::from_json(j.at("model").dump());
    ci.seed = j.at("seed").get<std::uint64_t>();
    ci.step = j.at("step").get<std::size_t>();
    ci.val_nll = j.at("val_nll").is_null() ? kInf : j.at("val_nll").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint sidecar " + path + ".json: " + e.what());
  }
  model::SConvCnp m(ci.config, ci.seed);
  m.load_params(ag::load_archive(path));
  if (info) *info = ci;
  return m;
}

void save_state(const std::string& path, const model::SConvCnp& model, const Adam& adam, const TrainProgress& p) {
  ag::NamedTensors all;
  all.emplace_back("counters", ag::Tensor::from({4}, {static_cast<double>(p.next_step), p.best_val_nll,
                                                      static_cast<double>(p.best_step),
                                                      static_cast<double>(adam.steps())}));
  for (const auto& t : model.params()) all.push_back(t);
  for (const auto& t : adam.state(model.params())) all.push_back(t);
  for (const auto& [name, t] : p.best_params) all.emplace_back("best." + name, t);
  ag::save_archive(path, all, true);
}

TrainProgress load_state(const std::string& path, model::SConvCnp& model, Adam& adam) {
  const auto all = ag::load_archive(path, true);
  const std::size_t n = model.params().size();
  if (all.empty() || all[0].first != "counters" || all[0].second.numel() != 4 ||
      (all.size() != 1 + 3 * n && all.size() != 1 + 4 * n))
    throw DataError("training state " + path + " does not match the model");
  const auto& c = all[0].second.values();
  TrainProgress p;
  p.next_step = static_cast<std::size_t>(c[0]);
  p.best_val_nll = c[1];
  p.best_step = static_cast<std::size_t>(c[2]);
  model.load_params(ag::NamedTensors(all.begin() + 1, all.begin() + 1 + static_cast<std::ptrdiff_t>(n)));
  adam.restore(ag::NamedTensors(all.begin() + 1 + static_cast<std::ptrdiff_t>(n),
                                all.begin() + 1 + static_cast<std::ptrdiff_t>(3 * n)),
               model.params(), static_cast<std::uint64_t>(c[3]));
  for (std::size_t i = 1 + 3 * n; i < all.size(); ++i) {
    const auto& name = all[i].first;
    if (name.rfind("best.", 0) != 0) throw DataError("unexpected entry '" + name + "' in training state");
    p.best_params.emplace_back(name.substr(5), all[i].second);
  }
  return p;
}

Predictor model_predictor(const model::SConvCnp& model) {
  return [&model](const Task& t) { return model.predict(t.context, model::target_locations(t)); };
}

double fitted_constant_sigma(const std::vector<Task>& tasks) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& t : tasks)
    for (const auto& d : t.target)
      for (const auto& v : d.features) {
        acc += v.real() * v.real() + v.imag() * v.imag();
        n += 2;
      }
  if (n == 0) throw ArgumentError("no target features to fit a scale");
  return std::sqrt(acc / static_cast<double>(n));
}

Predictor zero_predictor(double sigma) {
  return [sigma](const Task& t) {
    std::vector<Prediction> out(t.target.size());
    for (auto& p : out) {
      p.mean.assign(2 * t.bins, Complex{});
      p.stddev.assign(2 * t.bins, Complex(sigma, sigma));
    }
    return out;
  };
}

EvalReport evaluate(const Predictor& predict, const std::vector<Task>& tasks, const MeanEnvelope* mean,
                    bool keep_feature_rows) {
  struct Partial {
    TaskReport report;
    std::vector<FeatureRow> rows;
    std::vector<metrics::CalibrationPair> pairs;
  };
  std::vector<Partial> parts(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t k) {
    const Task& task = tasks[k];
    const std::size_t F = task.bins;
    Partial& out = parts[k];
    TaskReport& rep = out.report;
    rep.task = k;
    rep.subject_id = task.subject_id;
    rep.context = task.context.size();
    rep.targets = task.target.size();
    const auto preds = predict(task);
    if (preds.size() != task.target.size()) throw ArgumentError("predictor returned the wrong number of targets");
    const bool probabilistic = !preds.empty() && !preds[0].stddev.empty();
    double nll = 0.0, lre_sum = 0.0, lmd_sum = 0.0, lsd_sum = 0.0;
    std::size_t lre_n = 0, lmd_n = 0, lsd_n = 0;
    for (std::size_t t = 0; t < task.target.size(); ++t) {
      const DataPoint& d = task.target[t];
      if (probabilistic) {
        nll -= model::predictive_log_density(d.features, preds[t]);
        metrics::append_calibration_pairs(d.features, preds[t], out.pairs);
      }
      std::vector<Complex> truth = d.features, est = preds[t].mean;
      if (mean) {
        if (d.index >= mean->size() || mean->bins() != F) throw GridError("mean envelope does not cover the task");
        for (std::size_t e = 0; e < 2; ++e)
          for (std::size_t f = 0; f < F; ++f) {
            const Complex m = mean->mean[(d.index * 2 + e) * F + f];
            truth[e * F + f] += m;
            est[e * F + f] += m;
          }
      }
      for (std::size_t e = 0; e < 2; ++e)
        for (std::size_t f = 0; f < F; ++f) {
          const auto a = metrics::lre(est[e * F + f], truth[e * F + f]);
          const auto b = metrics::lmd(est[e * F + f], truth[e * F + f]);
          if (a) lre_sum += *a, ++lre_n;
          if (b) lmd_sum += *b, ++lmd_n;
          if (!a || !b) ++rep.excluded;
          if (keep_feature_rows) out.rows.push_back({k, t, e, f, a, b});
        }
      const auto s = metrics::lsd(truth, est);
      if (s.db) lsd_sum += *s.db, ++lsd_n;
    }
    if (probabilistic && rep.targets > 0) rep.nll = nll / static_cast<double>(rep.targets);
    if (lre_n) rep.lre_db = lre_sum / static_cast<double>(lre_n);
    if (lmd_n) rep.lmd_db = lmd_sum / static_cast<double>(lmd_n);
    if (lsd_n) rep.lsd_db = lsd_sum / static_cast<double>(lsd_n);
  });

  EvalReport r;
  auto aggregate = [&](auto member) -> std::optional<double> {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& p : parts)
      if (const auto& v = p.report.*member) s += *v, ++n;
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
  };
  r.mean_nll = aggregate(&TaskReport::nll);
  r.mean_lre_db = aggregate(&TaskReport::lre_db);
  r.mean_lmd_db = aggregate(&TaskReport::lmd_db);
  r.mean_lsd_db = aggregate(&TaskReport::lsd_db);
  for (auto& p : parts) {
    r.tasks.push_back(std::move(p.report));
    r.features.insert(r.features.end(), p.rows.begin(), p.rows.end());
    r.calibration.insert(r.calibration.end(), p.pairs.begin(), p.pairs.end());
  }
  return r;
}

}  // namespace hrtfnp::train
