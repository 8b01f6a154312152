#pragma once

// Drives the hrtf-np executable from tests: single-threaded runs with
// captured output, an independent writer for raw containers and a pipeline
// used by the determinism checks.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifndef HRTF_NP_EXE
#error "HRTF_NP_EXE must name the hrtf-np executable"
#endif

namespace cli_test {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string output;  // stdout and stderr
};

inline RunResult run(const std::string& args) {
  const std::string cmd = std::string("HRTF_NP_THREADS=1 '") + HRTF_NP_EXE + "' " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

inline fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hrtfnp_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

/// Byte-level writer for a raw HRIR container, written from the layout
/// description rather than the library encoder. Little-endian host assumed.
class RawContainer {
 public:
  RawContainer(const std::string& id, double fs, std::uint32_t taps, std::uint32_t positions) {
    bytes_ += "HRTF-NP1";
    put<std::uint32_t>(1);
    put<std::uint8_t>(0);
    put<std::uint32_t>(static_cast<std::uint32_t>(id.size()));
    bytes_ += id;
    put<double>(fs);
    put<std::uint32_t>(taps);
    put<std::uint32_t>(positions);
  }
  void position(double x, double y, double z) {
    put(x);
    put(y);
    put(z);
  }
  void tap(float v) { put(v); }
  const std::string& bytes() const { return bytes_; }

 private:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    bytes_.append(b, sizeof(T));
  }
  std::string bytes_;
};

/// Exponentially decaying impulse starting at `delay` samples.
inline float decaying_tap(std::size_t n, std::size_t delay, double pole) {
  return n < delay ? 0.0f : static_cast<float>(std::pow(pole, static_cast<double>(n - delay)));
}

/// Relative file path -> bytes for every regular file below `root`.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_bytes(e.path());
  return files;
}

/// Drops the last CSV column (wall-clock time) of every non-comment line.
inline std::string strip_last_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') line = line.substr(0, line.rfind(','));
    out += line + "\n";
  }
  return out;
}

/// Runs every subcommand once into `dir`. Returns the failing command line,
/// or an empty string when all succeeded.
inline std::string run_pipeline(const fs::path& dir, const fs::path& raw_input) {
  const std::string data = q(dir / "data"), split = q(dir / "data" / "split.json");
  const std::string common = " --seed 11 --split " + split + " --inputs " + data;
  const std::vector<std::string> cmds = {
      "preprocess --seed 11 --input " + q(raw_input) + " --output " + q(dir / "aligned.hrtf"),
      "synth --seed 11 --out " + data + " --train 4 --validate 2 --test 2 --positions 150",
      "mean" + common + " --output " + q(dir / "mean.hrtf"),
      "center" + common + " --mean " + q(dir / "mean.hrtf") + " --output " + q(dir / "centered"),
      "gp-fit" + common + " --tasks 30 --iterations 20 --out " + q(dir / "hyper.json"),
      "baseline" + common + " --method gp --hyper " + q(dir / "hyper.json") + " --tasks 6 --out " +
          q(dir / "gp.csv") + " --pairs-out " + q(dir / "gp_pairs.csv") + " --calibration-out " +
          q(dir / "gp_cal.csv") + " --summary " + q(dir / "gp.json") + " --features-out " + q(dir / "gp_feat.csv"),
      "baseline" + common + " --method spline --tasks 4 --out " + q(dir / "spline.csv"),
      "baseline" + common + " --method barycentric --tasks 4 --out " + q(dir / "bary.csv"),
      "train" + common + " --preset micro --steps 40 --val-interval 20 --val-tasks 4 --lr 0.003 --out " +
          q(dir / "run"),
      "eval" + common + " --checkpoint " + q(dir / "run" / "best.ckpt") + " --tasks 6 --out " +
          q(dir / "eval.csv") + " --pairs-out " + q(dir / "eval_pairs.csv") + " --summary " +
          q(dir / "eval.json") + " --calibration-out " + q(dir / "eval_cal.csv"),
      "calibrate --seed 11 --pairs " + q(dir / "eval_pairs.csv") + " --bins 5 --out " + q(dir / "cal.csv") +
          " --summary " + q(dir / "cal.json"),
  };
  for (const auto& c : cmds) {
    const auto r = run(c);
    if (r.code != 0) return c + "\n" + r.output;
  }
  return {};
}

/// Files that differ between two pipeline runs (the training log is compared
/// without its wall-clock column).
inline std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
  const auto fa = snapshot(a), fb = snapshot(b);
  std::vector<std::string> diff;
  for (const auto& [name, bytes] : fa) {
    const auto it = fb.find(name);
    if (it == fb.end()) {
      diff.push_back(name + " (missing in second run)");
      continue;
    }
    const bool log = fs::path(name).filename() == "train_log.csv";
    if (log ? strip_last_column(bytes) != strip_last_column(it->second) : bytes != it->second) diff.push_back(name);
  }
  for (const auto& [name, bytes] : fb)
    if (!fa.count(name)) diff.push_back(name + " (missing in first run)");
  return diff;
}

/// Raw 44.1 kHz container with decaying impulses, delays 10 + p % 7 (left)
/// and 14 + p % 5 (right).
inline void write_raw_fixture(const fs::path& path, const std::string& id, std::uint32_t positions,
                              std::uint32_t taps, double fs = 44100.0) {
  RawContainer c(id, fs, taps, positions);
  for (std::uint32_t p = 0; p < positions; ++p) {
    const double z = 1.0 - 2.0 * (p + 0.5) / positions, r = std::sqrt(1.0 - z * z), a = 2.399963229728653 * p;
    c.position(r * std::cos(a), r * std::sin(a), z);
  }
  for (std::uint32_t p = 0; p < positions; ++p)
    for (std::size_t ear = 0; ear < 2; ++ear)
      for (std::size_t n = 0; n < taps; ++n)
        c.tap(decaying_tap(n, ear == 0 ? 10 + p % 7 : 14 + p % 5, ear == 0 ? 0.6 : 0.5));
  write_bytes(path, c.bytes());
}

}  // namespace cli_test
