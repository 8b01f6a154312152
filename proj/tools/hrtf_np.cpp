// hrtf-np: batch front end for preprocessing, baselines, training and
// evaluation. Exit codes: 0 ok, 2 usage or format, 3 data consistency,
// 4 numeric failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cli_support.hpp"
#include "hrtfnp/baselines.hpp"
#include "hrtfnp/dataset.hpp"
#include "hrtfnp/errors.hpp"
#include "hrtfnp/hrtf_signal.hpp"
#include "hrtfnp/metrics.hpp"
#include "hrtfnp/parallel.hpp"
#include "hrtfnp/synthetic.hpp"
#include "hrtfnp/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hrtfnp;
using namespace hrtfnp::cli;

namespace {

constexpr const char* kInputs = "Inputs";
constexpr const char* kOutputs = "Outputs";

std::string join_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

const CLI::Validator kParentExists(
    [](std::string& path) -> std::string {
      const auto parent = fs::path(path).parent_path();
      if (!parent.empty() && !fs::is_directory(parent)) return "directory " + parent.string() + " does not exist";
      return {};
    },
    "PATH", "ParentExists");

CLI::Option* add_output(CLI::App* cmd, const std::string& name, std::string& target, const std::string& help,
                        bool required) {
  auto* opt = cmd->add_option(name, target, help)->check(kParentExists)->group(kOutputs);
  if (required) opt->required();
  return opt;
}

/// Output directories are created with their parents.
CLI::Option* add_output_dir(CLI::App* cmd, const std::string& name, std::string& target, const std::string& help) {
  return cmd->add_option(name, target, help)->required()->group(kOutputs);
}

CLI::Option* add_input(CLI::App* cmd, const std::string& name, std::string& target, const std::string& help,
                       bool required, const CLI::Validator& exists = CLI::ExistingFile) {
  auto* opt = cmd->add_option(name, target, help)->check(exists)->group(kInputs);
  if (required) opt->required();
  return opt;
}

/// Canonical settings of the invoked subcommand. File locations are left out:
/// the hash identifies the computation, not where its files live.
std::string settings_of(const CLI::App* cmd) {
  std::string s = "command=" + cmd->get_name() + "\n";
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_group() == kInputs || opt->get_group() == kOutputs || opt->get_name() == "--help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : " ") + r;
    } else {
      value = opt->get_default_str();
    }
    s += opt->get_name() + "=" + value + "\n";
  }
  return s;
}

// --- preprocess -------------------------------------------------------------

struct PreprocessCmd {
  std::string input, output;
  bool no_resample = false;

  void add(CLI::App* cmd) {
    add_input(cmd, "--input", input, "raw HRIR container (kind 0)", true);
    add_output(cmd, "--output", output, "aligned container (kind 1)", true);
    cmd->add_flag("--no-resample", no_resample, "skip the 44.1 -> 33.075 kHz conversion");
  }

  void run(const Provenance&) const {
    const auto kind = peek_container_kind(input);
    if (kind != ContainerKind::kRawHrir)
      throw ArgumentError(input + " is not a raw HRIR container (kind " + std::to_string(static_cast<int>(kind)) +
                          "); preprocess only accepts kind 0 and will not process its own output again");
    const HrtfSet raw = load_hrtf_set(input);
    if (raw.size() == 0) throw DataError(input + " holds no positions");
    AlignedSet out;
    out.subject_id = raw.subject_id;
    out.positions = raw.positions;
    out.delays.resize(raw.size());
    const Hrir first = no_resample ? raw.hrir(0) : signal::resample_3_4(raw.hrir(0));
    out.fs = first.fs;
    out.taps = first.taps();
    const std::size_t F = out.bins();
    out.spectra.assign(raw.size() * 2 * F, Complex{});
    parallel_for(raw.size(), [&](std::size_t p) {
      const Hrir h = no_resample ? raw.hrir(p) : signal::resample_3_4(raw.hrir(p));
      const PureDelay d = signal::estimate_pure_delay(h);
      const HalfSpectrum m = signal::time_align(signal::half_spectrum(h), d);
      out.delays[p] = d;
      for (std::size_t e = 0; e < 2; ++e)
        std::copy(m.ears[e].begin(), m.ears[e].end(), out.spectra.begin() + static_cast<std::ptrdiff_t>((p * 2 + e) * F));
    });
    save_container(output, out);
    std::cout << "preprocess: " << raw.subject_id << ", " << raw.size() << " positions, N " << raw.taps << " -> "
              << out.taps << ", fs " << raw.fs << " -> " << out.fs << "\n";
  }
};

// --- mean / center -----------------------------------------------------------

void report_split(const DatasetSplit& split) {
  std::cout << "split: train " << split.train.size() << ", validate " << split.validate.size() << ", test "
            << split.test.size() << ", discarded " << split.discarded.size() << "\n";
}

MeanEnvelope train_mean(const DatasetSplit& split, const std::map<int, fs::path>& index) {
  if (split.train.empty()) throw DataError("split has no training subjects");
  std::vector<AlignedSet> sets;
  sets.reserve(split.train.size());
  for (int id : split.train) sets.push_back(*load_subjects(index, {id}).front());
  return compute_mean_envelope(sets);
}

struct MeanCmd {
  std::string split_path, inputs, output;

  void add(CLI::App* cmd) {
    add_input(cmd, "--split", split_path, "split manifest JSON", true);
    add_input(cmd, "--inputs", inputs, "directory of aligned containers", true, CLI::ExistingDirectory);
    add_output(cmd, "--output", output, "mean envelope container (kind 2)", true);
  }

  void run(const Provenance&) const {
    const auto split = DatasetSplit::load(split_path);
    report_split(split);
    const auto mean = train_mean(split, index_directory(inputs));
    save_container(output, mean);
    std::cout << "mean: " << split.train.size() << " training subjects, " << mean.size() << " positions\n";
  }
};

struct CenterCmd {
  std::string split_path, inputs, mean_path, output;

  void add(CLI::App* cmd) {
    add_input(cmd, "--split", split_path, "split manifest JSON", true);
    add_input(cmd, "--inputs", inputs, "directory of aligned containers", true, CLI::ExistingDirectory);
    add_input(cmd, "--mean", mean_path, "mean envelope; computed from the training subjects when omitted", false);
    add_output_dir(cmd, "--output", output, "directory for the residual containers");
  }

  void run(const Provenance&) const {
    const auto split = DatasetSplit::load(split_path);
    report_split(split);
    const auto index = index_directory(inputs);
    const MeanEnvelope mean = mean_path.empty() ? train_mean(split, index) : load_mean_envelope(mean_path);
    if (fs::exists(output) && fs::equivalent(inputs, output))
      throw ArgumentError("center would overwrite its inputs; choose another --output directory");
    fs::create_directories(output);
    std::vector<int> ids;
    for (const auto* list : {&split.train, &split.validate, &split.test}) ids.insert(ids.end(), list->begin(), list->end());
    std::sort(ids.begin(), ids.end());
    for (int id : ids) {
      const auto set = load_subjects(index, {id}).front();
      save_container(join_path(output, index.at(id).filename().string()), center(*set, mean));
    }
    std::cout << "center: wrote " << ids.size() << " residual sets\n";
  }
};

// --- synth -------------------------------------------------------------------

struct SynthCmd {
  std::string out;
  std::size_t train = 20, validate = 4, test = 4;
  synth::SyntheticConfig cfg;

  void add(CLI::App* cmd) {
    add_output_dir(cmd, "--out", out, "output directory (containers and split.json)");
    cmd->add_option("--train", train, "training subjects")->check(CLI::PositiveNumber);
    cmd->add_option("--validate", validate, "validation subjects");
    cmd->add_option("--test", test, "test subjects");
    cmd->add_option("--positions", cfg.positions, "positions per subject")->check(CLI::PositiveNumber);
    cmd->add_option("--bins", cfg.bins, "frequency bins F")->check(CLI::Range(2, 4097));
    cmd->add_option("--max-degree", cfg.max_degree, "field band limit")->check(CLI::Range(0, 64));
    cmd->add_option("--bin-correlation", cfg.bin_correlation, "AR(1) coefficient across bins")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--ear-noise", cfg.ear_noise, "relative right-ear noise")->check(CLI::NonNegativeNumber);
  }

  void run(const Provenance& prov) const {
    synth::SyntheticConfig c = cfg;
    c.seed = prov.seed;
    fs::create_directories(out);
    DatasetSplit split;
    std::size_t index = 1;
    for (auto [list, n] : {std::pair{&split.train, train}, {&split.validate, validate}, {&split.test, test}})
      for (std::size_t k = 0; k < n; ++k, ++index) {
        const auto set = synth::generate_subject(c, index);
        save_container(join_path(out, set.subject_id + ".hrtf"), set);
        list->push_back(static_cast<int>(index));
      }
    split.save(join_path(out, "split.json"));
    std::cout << "synth: " << index - 1 << " subjects, " << c.positions << " positions, " << c.bins << " bins\n";
  }
};

// --- gp-fit ------------------------------------------------------------------

struct GpFitCmd {
  std::string split_path, inputs, out;
  std::size_t tasks = 340, max_context = 100, iterations = 200;
  double init_beta = 10.0;

  void add(CLI::App* cmd) {
    add_input(cmd, "--split", split_path, "split manifest JSON", true);
    add_input(cmd, "--inputs", inputs, "directory of residual containers", true, CLI::ExistingDirectory);
    cmd->add_option("--tasks", tasks, "training tasks to fit on")->check(CLI::PositiveNumber);
    cmd->add_option("--max-context", max_context, "largest context size drawn");
    cmd->add_option("--iterations", iterations, "gradient-ascent iterations")->check(CLI::PositiveNumber);
    cmd->add_option("--init-beta", init_beta, "initial kernel precision")->check(CLI::PositiveNumber);
    add_output(cmd, "--out", out, "hyperparameter JSON", true);
  }

  void run(const Provenance& prov) const {
    const auto split = DatasetSplit::load(split_path);
    const auto subjects = load_subjects(index_directory(inputs), split.train);
    const auto task_list =
        make_tasks(subjects, TaskSpec{tasks, std::nullopt}, max_context, prov.seed, kTrainStream, false);
    baseline::GpFitOptions opt;
    opt.iterations = iterations;
    const auto res = baseline::gp_fit_beta(task_list, baseline::GpHyper::uniform(subjects.front()->bins(), init_beta), opt);
    res.hyper.save(out);
    double init = 0.0, fin = 0.0;
    for (std::size_t i = 0; i < res.lml_init.size(); ++i) init += res.lml_init[i], fin += res.lml_final[i];
    const double n = static_cast<double>(std::max<std::size_t>(res.lml_init.size(), 1));
    std::cout << "gp-fit: consumed " << task_list.size() << " tasks (" << res.tasks_used << " with context points) from "
              << subjects.size() << " training subjects; mean log marginal likelihood per point " << init / n << " -> " << fin / n
              << "\n";
  }
};

// --- evaluation shared by baseline and eval ------------------------------------

struct EvalOptions {
  std::string split_path, inputs, role = "test", tasks = "100", mean_path;
  std::size_t max_context = 100, divisions = 10;
  std::string out, features_out, pairs_out, calibration_out, summary;

  void add(CLI::App* cmd) {
    add_input(cmd, "--split", split_path, "split manifest JSON", true);
    add_input(cmd, "--inputs", inputs, "directory of residual containers", true, CLI::ExistingDirectory);
    cmd->add_option("--role", role, "subjects to evaluate on")->check(CLI::IsMember({"train", "validate", "test"}));
    cmd->add_option("--tasks", tasks, "N tasks, or N:C for exactly C context points each");
    cmd->add_option("--max-context", max_context, "largest context size drawn");
    add_input(cmd, "--mean", mean_path, "mean envelope added back before the accuracy metrics", false);
    cmd->add_option("--divisions", divisions, "calibration divisions D")->check(CLI::PositiveNumber);
    add_output(cmd, "--out", out, "per-task CSV", true);
    add_output(cmd, "--features-out", features_out, "per-feature LRE/LMD CSV", false);
    add_output(cmd, "--pairs-out", pairs_out, "calibration pairs CSV", false);
    add_output(cmd, "--calibration-out", calibration_out, "calibration curve CSV", false);
    add_output(cmd, "--summary", summary, "summary JSON", false);
  }

  std::vector<Task> load_tasks(const Provenance& prov) const {
    const auto spec = TaskSpec::parse(tasks);
    const auto split = DatasetSplit::load(split_path);
    const auto& ids = role_ids(split, role);
    if (spec.count > 0 && ids.empty()) throw DataError("split has no " + role + " subjects");
    const auto subjects = load_subjects(index_directory(inputs), ids);
    return make_tasks(subjects, spec, max_context, prov.seed, role_stream(role), false);
  }

  void run(const std::string& method, const train::Predictor& predict, const std::vector<Task>& task_list,
           const Provenance& prov) const {
    std::optional<MeanEnvelope> mean;
    if (!mean_path.empty()) mean = load_mean_envelope(mean_path);
    const auto report = train::evaluate(predict, task_list, mean ? &*mean : nullptr, !features_out.empty());

    CsvWriter per_task(out, prov, {"task", "subject", "context", "targets", "nll", "lre_db", "lmd_db", "lsd_db",
                                   "excluded"});
    for (const auto& t : report.tasks)
      per_task.row({std::to_string(t.task), t.subject_id, std::to_string(t.context), std::to_string(t.targets),
                    format_optional(t.nll), format_optional(t.lre_db), format_optional(t.lmd_db),
                    format_optional(t.lsd_db), std::to_string(t.excluded)});
    per_task.close();

    if (!features_out.empty()) {
      CsvWriter w(features_out, prov, {"task", "target", "ear", "bin", "lre_db", "lmd_db"});
      for (const auto& f : report.features)
        w.row({std::to_string(f.task), std::to_string(f.target), std::to_string(f.ear), std::to_string(f.bin),
               format_optional(f.lre_db), format_optional(f.lmd_db)});
      w.close();
    }

    const bool probabilistic = !report.calibration.empty();
    if (!pairs_out.empty()) {
      CsvWriter w(pairs_out, prov, {"task", "target", "ear", "bin", "part", "variance", "squared_error"});
      std::size_t i = 0;
      for (std::size_t k = 0; k < task_list.size() && probabilistic; ++k) {
        const std::size_t F = task_list[k].bins;
        for (std::size_t t = 0; t < task_list[k].target.size(); ++t)
          for (std::size_t e = 0; e < 2; ++e)
            for (std::size_t f = 0; f < F; ++f)
              for (const char* part : {"re", "im"}) {
                const auto& p = report.calibration.at(i++);
                w.row({std::to_string(k), std::to_string(t), std::to_string(e), std::to_string(f), part,
                       format_number(p.variance), format_number(p.squared_error)});
              }
      }
      w.close();
    }

    std::optional<double> mcd;
    if (probabilistic && report.calibration.size() >= divisions) {
      const auto curve = metrics::calibration_curve(report.calibration, divisions);
      mcd = metrics::mcd(curve);
      if (!calibration_out.empty()) {
        CsvWriter w(calibration_out, prov, {"division", "mpv", "mse", "count"});
        for (std::size_t d = 0; d < curve.size(); ++d)
          w.row({std::to_string(d), format_number(curve[d].mpv), format_number(curve[d].mse),
                 std::to_string(curve[d].count)});
        w.close();
      }
    } else if (!calibration_out.empty()) {
      throw ArgumentError(probabilistic ? "fewer calibration pairs than divisions"
                                        : method + " gives point estimates; there is no calibration curve");
    }

    if (!summary.empty()) {
      json j;
      j["method"] = method;
      j["role"] = role;
      j["tasks"] = report.tasks.size();
      j["mean_nll"] = optional_json(report.mean_nll);
      j["mean_lre_db"] = optional_json(report.mean_lre_db);
      j["mean_lmd_db"] = optional_json(report.mean_lmd_db);
      j["mean_lsd_db"] = optional_json(report.mean_lsd_db);
      j["divisions"] = divisions;
      j["mcd_db"] = optional_json(mcd);
      j["seed"] = prov.seed;
      j["config_hash"] = prov.config_hash();
      write_text(summary, j.dump(2) + "\n");
    }

    std::cout << method << ": " << report.tasks.size() << " tasks";
    if (report.mean_nll) std::cout << ", mean NLL " << *report.mean_nll;
    if (report.mean_lre_db) std::cout << ", mean LRE " << *report.mean_lre_db << " dB";
    if (report.mean_lsd_db) std::cout << ", mean LSD " << *report.mean_lsd_db << " dB";
    if (mcd) std::cout << ", MCD " << *mcd << " dB";
    std::cout << "\n";
  }
};

std::vector<UnitVec3> target_locations(const Task& t) {
  std::vector<UnitVec3> q;
  q.reserve(t.target.size());
  for (const auto& d : t.target) q.push_back(d.location);
  return q;
}

std::vector<Prediction> point_predictions(const baseline::FeatureRows& rows) {
  std::vector<Prediction> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i].mean = rows[i];
  return out;
}

struct BaselineCmd {
  std::string method, hyper_path;
  double beta = 10.0;
  EvalOptions eval;

  void add(CLI::App* cmd) {
    cmd->add_option("--method", method, "interpolator")
        ->required()
        ->check(CLI::IsMember({"barycentric", "spline", "gp"}));
    add_input(cmd, "--hyper", hyper_path, "GP hyperparameters from gp-fit", false);
    cmd->add_option("--beta", beta, "uniform GP precision when --hyper is absent")->check(CLI::PositiveNumber);
    eval.add(cmd);
  }

  void run(const Provenance& prov) const {
    const auto tasks = eval.load_tasks(prov);
    train::Predictor predict;
    if (method == "barycentric") {
      predict = [](const Task& t) { return point_predictions(baseline::barycentric_predict(t.context, target_locations(t))); };
    } else if (method == "spline") {
      predict = [](const Task& t) { return point_predictions(baseline::spline_predict(t.context, target_locations(t))); };
    } else {
      const std::size_t bins = tasks.empty() ? 1 : tasks.front().bins;
      const auto hyper =
          hyper_path.empty() ? baseline::GpHyper::uniform(bins, beta) : baseline::GpHyper::load(hyper_path);
      if (!tasks.empty() && hyper.bins != bins)
        throw DataError("hyperparameters cover " + std::to_string(hyper.bins) + " bins, data has " +
                        std::to_string(bins));
      predict = [hyper](const Task& t) {
        return baseline::gp_predictions(baseline::gp_predict(t.context, target_locations(t), hyper), hyper.noise);
      };
    }
    eval.run(method, predict, tasks, prov);
  }
};

struct EvalCmd {
  std::string checkpoint;
  EvalOptions eval;

  void add(CLI::App* cmd) {
    add_input(cmd, "--checkpoint", checkpoint, "model checkpoint", true);
    eval.add(cmd);
  }

  void run(const Provenance& prov) const {
    const auto model = train::load_checkpoint(checkpoint);
    const auto tasks = eval.load_tasks(prov);
    if (!tasks.empty() && tasks.front().bins != model.config().bins)
      throw DataError("checkpoint expects " + std::to_string(model.config().bins) + " bins, data has " +
                      std::to_string(tasks.front().bins));
    eval.run("sconvcnp", train::model_predictor(model), tasks, prov);
  }
};

// --- calibrate ---------------------------------------------------------------

struct CalibrateCmd {
  std::string pairs, out, summary, part;
  std::size_t divisions = 10;
  std::optional<std::size_t> bin;

  void add(CLI::App* cmd) {
    add_input(cmd, "--pairs", pairs, "calibration pairs CSV from eval or baseline", true);
    cmd->add_option("--bins", divisions, "number of divisions D")->check(CLI::PositiveNumber);
    cmd->add_option("--bin", bin, "keep only this frequency bin");
    cmd->add_option("--part", part, "keep only real or imaginary components")->check(CLI::IsMember({"re", "im"}));
    add_output(cmd, "--out", out, "calibration curve CSV", true);
    add_output(cmd, "--summary", summary, "summary JSON", false);
  }

  void run(const Provenance& prov) const {
    const auto table = read_csv(pairs);
    const std::size_t c_bin = table.column("bin"), c_part = table.column("part"), c_var = table.column("variance"),
                      c_err = table.column("squared_error");
    std::vector<metrics::CalibrationPair> list;
    for (const auto& r : table.rows) {
      if (bin && r[c_bin] != std::to_string(*bin)) continue;
      if (!part.empty() && r[c_part] != part) continue;
      try {
        list.push_back({std::stod(r[c_var]), std::stod(r[c_err])});
      } catch (const std::logic_error&) {
        throw DataError("non-numeric calibration pair in " + pairs);
      }
    }
    const auto curve = metrics::calibration_curve(list, divisions);
    const double value = metrics::mcd(curve);
    CsvWriter w(out, prov, {"division", "mpv", "mse", "count"});
    for (std::size_t d = 0; d < curve.size(); ++d)
      w.row({std::to_string(d), format_number(curve[d].mpv), format_number(curve[d].mse),
             std::to_string(curve[d].count)});
    w.close();
    if (!summary.empty()) {
      json j;
      j["pairs"] = list.size();
      j["divisions"] = divisions;
      j["mcd_db"] = value;
      j["seed"] = prov.seed;
      j["config_hash"] = prov.config_hash();
      write_text(summary, j.dump(2) + "\n");
    }
    std::cout << "calibrate: " << list.size() << " pairs, " << divisions << " divisions, MCD " << value << " dB\n";
  }
};

// --- train -------------------------------------------------------------------

struct TrainCmd {
  std::string split_path, inputs, out, resume, preset = "desk", activation;
  train::TrainConfig cfg;
  std::size_t val_tasks = 32, max_context = 100;
  std::optional<std::size_t> grid, channels, cnn_blocks, mlp_blocks, freq_kernel, anchors;
  std::optional<int> bandwidth;
  std::optional<double> sigma_floor;
  bool untied = false;

  void add(CLI::App* cmd) {
    add_input(cmd, "--split", split_path, "split manifest JSON", true);
    add_input(cmd, "--inputs", inputs, "directory of residual containers", true, CLI::ExistingDirectory);
    add_output_dir(cmd, "--out", out, "run directory (log, checkpoints, state)");
    add_input(cmd, "--resume", resume, "continue from a last.state file", false);
    cmd->add_option("--steps", cfg.steps, "optimizer steps")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", cfg.batch, "tasks per step")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", cfg.adam.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
    cmd->add_option("--val-interval", cfg.val_interval, "steps between validations (0 disables)");
    cmd->add_option("--val-tasks", val_tasks, "validation tasks");
    cmd->add_option("--state-interval", cfg.state_interval, "steps between resumable state files (0: end only)");
    cmd->add_option("--max-context", max_context, "largest context size drawn");
    cmd->add_option("--preset", preset, "model size")->check(CLI::IsMember({"desk", "micro"}));
    cmd->add_option("--grid", grid, "grid size G (even)");
    cmd->add_option("--bandwidth", bandwidth, "band limit L");
    cmd->add_option("--channels", channels, "channel count M (even)");
    cmd->add_option("--cnn-blocks", cnn_blocks, "residual CNN blocks");
    cmd->add_option("--mlp-blocks", mlp_blocks, "residual MLP blocks");
    cmd->add_option("--freq-kernel", freq_kernel, "frequency kernel size (odd)");
    cmd->add_option("--anchors", anchors, "zonal filter anchors");
    cmd->add_option("--sigma-floor", sigma_floor, "lower bound of the predictive scale");
    cmd->add_option("--activation", activation, "nonlinearity")->check(CLI::IsMember({"relu", "softplus"}));
    cmd->add_flag("--untied-ears", untied, "do not tie the weights of the two ear halves");
  }

  model::ModelConfig model_config(std::size_t bins) const {
    model::ModelConfig m = preset == "micro" ? model::ModelConfig::micro(bins) : model::ModelConfig{};
    m.bins = bins;
    if (grid) m.grid = *grid;
    if (bandwidth) m.bandwidth = *bandwidth;
    if (channels) m.channels = *channels;
    if (cnn_blocks) m.cnn_blocks = *cnn_blocks;
    if (mlp_blocks) m.mlp_blocks = *mlp_blocks;
    if (freq_kernel) m.freq_kernel = *freq_kernel;
    if (anchors) m.anchors = *anchors;
    if (sigma_floor) m.sigma_floor = *sigma_floor;
    if (!activation.empty()) m.activation = activation == "softplus" ? model::Activation::kSoftplus : model::Activation::kRelu;
    if (untied) m.ear_symmetric = false;
    m.validate();
    return m;
  }

  void run(const Provenance& prov) const {
    train::TrainConfig c = cfg;
    c.seed = prov.seed;
    c.out_dir = out;
    c.validate();
    const auto split = DatasetSplit::load(split_path);
    const auto index = index_directory(inputs);
    const auto train_sets = load_subjects(index, split.train);
    if (train_sets.empty()) throw DataError("split has no training subjects");
    std::vector<Task> val;
    if (c.val_interval > 0 && val_tasks > 0) {
      if (split.validate.empty()) throw DataError("validation requested but the split has no validation subjects");
      val = make_tasks(load_subjects(index, split.validate), TaskSpec{val_tasks, std::nullopt}, max_context, prov.seed,
                       kValidateStream, false);
    }
    const auto mcfg = model_config(train_sets.front()->bins());
    model::SConvCnp model(mcfg, prov.seed);
    train::Adam adam(model.params(), c.adam);
    auto progress = train::TrainProgress::fresh();
    if (!resume.empty()) progress = train::load_state(resume, model, adam);

    SamplerConfig sampler;
    sampler.max_context = max_context;
    sampler.seed = prov.seed;
    TaskStream stream(train_sets, sampler, kTrainStream, true);
    std::cout << "train: " << model.parameter_count() << " parameters, " << train_sets.size() << " subjects, "
              << val.size() << " validation tasks, steps " << progress.next_step << ".." << c.steps << "\n";
    const auto result = train::fit(model, adam, stream, val, c, progress);

    CsvWriter log(join_path(out, "train_log.csv"), prov, {"step", "train_nll", "val_nll", "wall_time"});
    for (const auto& r : result.log)
      log.row({std::to_string(r.step), format_number(r.train_nll), format_optional(r.val_nll),
               format_number(r.wall_time)});
    log.close();
    const std::size_t last_step = result.log.empty() ? progress.next_step : result.log.back().step;
    train::save_checkpoint(join_path(out, "final.ckpt"), model.params(),
                           {mcfg, prov.seed, last_step, result.best_val_nll});
    if (result.halted) throw NumericError(result.diagnostic);
    std::cout << "train: " << result.log.size() << " steps";
    if (result.best_step > 0) std::cout << ", best validation NLL " << result.best_val_nll << " at step " << result.best_step;
    std::cout << "\n";
  }
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const GeometryError*>(&e) || dynamic_cast<const ContainmentError*>(&e))
    return 3;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const DegenerateSpectrumError*>(&e))
    return 4;
  if (dynamic_cast<const Error*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e) ||
      dynamic_cast<const json::exception*>(&e))
    return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spherical HRTF interpolation: preprocessing, baselines, training and evaluation"};
  app.set_version_flag("--version", std::string("hrtf-np ") + kToolVersion);
  app.set_config("--config", "", "INI file; [section] names a subcommand, keys are its long option names")
      ->check(CLI::ExistingFile);
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for every random choice");

  PreprocessCmd preprocess;
  MeanCmd mean;
  CenterCmd center_cmd;
  SynthCmd synth_cmd;
  GpFitCmd gp_fit;
  BaselineCmd baseline_cmd;
  EvalCmd eval;
  CalibrateCmd calibrate;
  TrainCmd train_cmd;

  std::vector<std::pair<CLI::App*, std::function<void(const Provenance&)>>> commands;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmd.add(sub);
    commands.emplace_back(sub, [&cmd](const Provenance& p) { cmd.run(p); });
  };
  add("preprocess", "resample, estimate pure delays and time-align a raw HRIR container", preprocess);
  add("mean", "mean envelope of the training subjects", mean);
  add("center", "subtract the training mean from every split subject", center_cmd);
  add("synth", "write a synthetic benchmark dataset and its split manifest", synth_cmd);
  add("gp-fit", "fit GP kernel precisions on training tasks", gp_fit);
  add("baseline", "evaluate a classical interpolator", baseline_cmd);
  add("train", "meta-train the neural process", train_cmd);
  add("eval", "evaluate a checkpoint", eval);
  add("calibrate", "calibration curve and MCD from calibration pairs", calibrate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& [sub, run] : commands) {
    if (!sub->parsed()) continue;
    Provenance prov{seed, settings_of(sub)};
    try {
      run(prov);
    } catch (const std::exception& e) {
      std::cerr << "hrtf-np " << sub->get_name() << ": " << e.what() << "\n";
      return exit_code_for(e);
    }
  }
  return 0;
}
