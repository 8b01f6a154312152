#include "cli_support.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "hrtfnp/errors.hpp"

namespace hrtfnp::cli {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Provenance::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(settings)));
  return buf;
}

std::string Provenance::comment_line() const {
  return std::string("# hrtf-np ") + kToolVersion + " seed=" + std::to_string(seed) + " config=" + config_hash();
}

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

CsvWriter::CsvWriter(const std::string& path, const Provenance& prov, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open " + path + " for writing");
  out_ << prov.comment_line() << '\n';
  row(header);
}

std::string CsvWriter::quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string q = "\"";
  for (char c : field) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << quote(fields[i]);
  }
  out_ << '\n';
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw IoError("failed writing " + path_);
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::string& path) {
  const std::string text = read_text(path);
  CsvTable table;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, at_line_start = true, comment = false;
  std::size_t offset = 0;
  auto end_row = [&] {
    fields.push_back(field);
    field.clear();
    if (table.header.empty())
      table.header = std::move(fields);
    else if (fields.size() != table.header.size())
      throw FormatError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(table.header.size()),
                        offset);
    else
      table.rows.push_back(std::move(fields));
    fields.clear();
  };
  for (; offset < text.size(); ++offset) {
    const char c = text[offset];
    if (comment) {
      if (c == '\n') comment = false, at_line_start = true;
      continue;
    }
    if (at_line_start && !quoted && c == '#') {
      comment = true;
      continue;
    }
    at_line_start = false;
    if (quoted) {
      if (c == '"') {
        if (offset + 1 < text.size() && text[offset + 1] == '"')
          field += '"', ++offset;
        else
          quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\n') {
      end_row();
      at_line_start = true;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field", offset);
  if (!at_line_start) end_row();
  return table;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<int, fs::path> index_directory(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
  std::map<int, fs::path> index;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".hrtf") continue;
    const auto id = subject_number(entry.path().stem().string());
    if (!id) continue;
    const auto [it, inserted] = index.emplace(*id, entry.path());
    if (!inserted)
      throw DataError("subject " + std::to_string(*id) + " appears twice: " + it->second.string() + " and " +
                      entry.path().string());
  }
  return index;
}

std::vector<std::shared_ptr<const AlignedSet>> load_subjects(const std::map<int, fs::path>& index,
                                                             const std::vector<int>& ids) {
  std::vector<std::shared_ptr<const AlignedSet>> sets;
  for (int id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("no container for subject " + std::to_string(id));
    auto set = std::make_shared<AlignedSet>(load_aligned_set(it->second.string()));
    if (subject_number(set->subject_id) != id)
      throw DataError(it->second.string() + " holds subject '" + set->subject_id + "', expected number " +
                      std::to_string(id));
    sets.push_back(std::move(set));
  }
  return sets;
}

const std::vector<int>& role_ids(const DatasetSplit& split, const std::string& role) {
  if (role == "train") return split.train;
  if (role == "validate") return split.validate;
  if (role == "test") return split.test;
  throw ArgumentError("unknown role '" + role + "'");
}

std::uint64_t role_stream(const std::string& role) {
  if (role == "train") return kTrainStream;
  if (role == "validate") return kValidateStream;
  if (role == "test") return kTestStream;
  throw ArgumentError("unknown role '" + role + "'");
}

namespace {

std::size_t parse_count(const std::string& s, const std::string& whole) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ArgumentError("bad task spec '" + whole + "' (expected N or N:C)");
  return v;
}

}  // namespace

TaskSpec TaskSpec::parse(const std::string& text) {
  TaskSpec spec;
  const auto colon = text.find(':');
  spec.count = parse_count(text.substr(0, colon), text);
  if (colon != std::string::npos) spec.context = parse_count(text.substr(colon + 1), text);
  return spec;
}

std::vector<Task> make_tasks(const std::vector<std::shared_ptr<const AlignedSet>>& subjects, const TaskSpec& spec,
                             std::size_t max_context, std::uint64_t seed, std::uint64_t stream_id, bool train_mode) {
  if (spec.count == 0) return {};
  if (subjects.empty()) throw DataError("no subjects to draw tasks from");
  SamplerConfig cfg;
  cfg.max_context = max_context;
  cfg.fixed_context = spec.context;
  cfg.seed = seed;
  const TaskStream stream(subjects, cfg, stream_id, train_mode);
  std::vector<Task> tasks;
  tasks.reserve(spec.count);
  for (std::size_t k = 0; k < spec.count; ++k) tasks.push_back(stream.at(k));
  return tasks;
}

}  // namespace hrtfnp::cli
