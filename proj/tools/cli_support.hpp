#pragma once

// Plumbing shared by the hrtf-np subcommands: CSV output with a provenance
// line, dataset directory lookup and task-set construction.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hrtfnp/dataset.hpp"
#include "hrtfnp/task.hpp"

namespace hrtfnp::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Stream ids keep the task sequences of the three roles independent.
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kValidateStream = 2;
inline constexpr std::uint64_t kTestStream = 3;

std::uint64_t fnv1a64(const std::string& text);

/// Identifies the settings that produced an output file.
struct Provenance {
  std::uint64_t seed = 0;
  std::string settings;  // canonical "key=value" lines, output paths excluded

  std::string config_hash() const;
  std::string comment_line() const;  // "# hrtf-np <version> seed=<s> config=<hash>"
};

/// Shortest round-trip decimal form.
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

/// RFC-4180 writer with LF line endings. The first line is the provenance
/// comment, the second the header.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const Provenance& prov, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& fields);
  void close();

  static std::string quote(const std::string& field);

 private:
  std::string path_;
  std::ofstream out_;
};

/// Reads a CSV written by CsvWriter: skips '#' lines and returns the header
/// and the rows. Throws FormatError on unbalanced quotes or ragged rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Containers in a directory keyed by the trailing digits of the file stem
/// ("pp12.hrtf" -> 12). Only ".hrtf" files are considered.
std::map<int, std::filesystem::path> index_directory(const std::string& dir);

/// Aligned sets of the listed subjects, in list order. Throws DataError when
/// a subject file is missing or its stored id names another subject.
std::vector<std::shared_ptr<const AlignedSet>> load_subjects(const std::map<int, std::filesystem::path>& index,
                                                             const std::vector<int>& ids);

/// Subject list of a split role: "train", "validate" or "test".
const std::vector<int>& role_ids(const DatasetSplit& split, const std::string& role);
std::uint64_t role_stream(const std::string& role);

/// "N" or "N:C": N tasks, optionally each with exactly C context points.
struct TaskSpec {
  std::size_t count = 0;
  std::optional<std::size_t> context;

  static TaskSpec parse(const std::string& text);
};

/// The first spec.count tasks of the role's evaluation stream.
std::vector<Task> make_tasks(const std::vector<std::shared_ptr<const AlignedSet>>& subjects, const TaskSpec& spec,
                             std::size_t max_context, std::uint64_t seed, std::uint64_t stream_id, bool train_mode);

}  // namespace hrtfnp::cli
