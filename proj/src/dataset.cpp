#include "hrtfnp/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <set>

#include "binary_io.hpp"
#include "hrtfnp/errors.hpp"
#include "json.hpp"

namespace hrtfnp {
namespace {

constexpr char kMagic[8] = {'H', 'R', 'T', 'F', '-', 'N', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void write_header(detail::ByteWriter& w, ContainerKind kind, const std::string& id, double fs, std::size_t n,
                  const std::vector<UnitVec3>& positions) {
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(kind));
  w.str(id);
  w.f64(fs);
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(positions.size()));
  for (const auto& p : positions) {
    w.f64(p.x());
    w.f64(p.y());
    w.f64(p.z());
  }
}

void write_spectra(detail::ByteWriter& w, const std::vector<Complex>& s) {
  for (const auto& v : s) {
    w.f32(static_cast<float>(v.real()));
    w.f32(static_cast<float>(v.imag()));
  }
}

void check_size(std::size_t expected, std::size_t actual, const char* what) {
  if (expected != actual) throw ArgumentError(std::string("inconsistent ") + what + " size");
}

struct Header {
  ContainerKind kind;
  std::string id;
  double fs;
  std::size_t n;
  std::vector<UnitVec3> positions;
};

Header read_header(detail::ByteReader& r) {
  Header h;
  const auto* magic = r.take(sizeof kMagic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("bad magic", 0);
  const std::size_t version_at = r.offset();
  if (r.u32("version") != kVersion) throw FormatError("unsupported container version", version_at);
  const std::size_t kind_at = r.offset();
  const std::uint8_t kind = r.u8("kind");
  if (kind > 2) throw FormatError("unknown container kind " + std::to_string(kind), kind_at);
  h.kind = static_cast<ContainerKind>(kind);
  h.id = r.str("subject id");
  const std::size_t fs_at = r.offset();
  h.fs = r.f64("sample rate");
  if (!(h.fs > 0.0) || !std::isfinite(h.fs)) throw FormatError("invalid sample rate", fs_at);
  const std::size_t n_at = r.offset();
  h.n = r.u32("tap count");
  if (h.n == 0 || h.n % 2 != 0) throw FormatError("tap count must be positive and even", n_at);
  const std::size_t p_at = r.offset();
  const std::size_t p = r.u32("position count");
  if (p == 0) throw FormatError("container has no positions", p_at);
  r.need(p * 24, "positions");
  h.positions.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t at = r.offset();
    const double x = r.f64("position"), y = r.f64("position"), z = r.f64("position");
    const double norm = std::sqrt(x * x + y * y + z * z);
    if (!(std::abs(norm - 1.0) <= 1e-9)) throw FormatError("position is not unit norm", at);
    h.positions.push_back(UnitVec3::from_unit(x, y, z));
  }
  return h;
}

std::vector<Complex> read_spectra(detail::ByteReader& r, std::size_t count) {
  r.need(count * 8, "spectra");
  std::vector<Complex> s(count);
  for (auto& v : s) {
    const double re = r.f32("spectra");
    const double im = r.f32("spectra");
    v = {re, im};
  }
  return s;
}

}  // namespace

Hrir HrtfSet::hrir(std::size_t p) const {
  Hrir h;
  h.fs = fs;
  for (std::size_t e = 0; e < 2; ++e) {
    const auto* first = data.data() + (p * 2 + e) * taps;
    h.ears[e].assign(first, first + taps);
  }
  return h;
}

void HrtfSet::set_hrir(std::size_t p, const Hrir& h) {
  if (h.taps() != taps) throw ArgumentError("HRIR tap count does not match the set");
  for (std::size_t e = 0; e < 2; ++e) std::copy(h.ears[e].begin(), h.ears[e].end(), data.begin() + (p * 2 + e) * taps);
}

std::vector<std::uint8_t> encode_container(const Container& c) {
  detail::ByteWriter w;
  if (const auto* s = std::get_if<HrtfSet>(&c)) {
    check_size(s->size() * 2 * s->taps, s->data.size(), "tap");
    write_header(w, ContainerKind::kRawHrir, s->subject_id, s->fs, s->taps, s->positions);
    for (double v : s->data) w.f32(static_cast<float>(v));
  } else if (const auto* a = std::get_if<AlignedSet>(&c)) {
    check_size(a->size(), a->delays.size(), "delay");
    check_size(a->size() * 2 * a->bins(), a->spectra.size(), "spectrum");
    write_header(w, ContainerKind::kAligned, a->subject_id, a->fs, a->taps, a->positions);
    for (const auto& d : a->delays) {
      w.f64(d.left);
      w.f64(d.right);
    }
    write_spectra(w, a->spectra);
  } else {
    const auto& m = std::get<MeanEnvelope>(c);
    check_size(m.size() * 2 * m.bins(), m.mean.size(), "mean");
    write_header(w, ContainerKind::kMeanEnvelope, "mean", m.fs, m.taps, m.positions);
    write_spectra(w, m.mean);
  }
  return w.data();
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  Header h = read_header(r);
  const std::size_t p = h.positions.size();
  const std::size_t bins = h.n / 2 + 1;
  Container out;
  switch (h.kind) {
    case ContainerKind::kRawHrir: {
      HrtfSet s;
      s.subject_id = std::move(h.id);
      s.fs = h.fs;
      s.taps = h.n;
      s.positions = std::move(h.positions);
      r.need(p * 2 * h.n * 4, "taps");
      s.data.resize(p * 2 * h.n);
      for (auto& v : s.data) v = r.f32("taps");
      out = std::move(s);
      break;
    }
    case ContainerKind::kAligned: {
      AlignedSet a;
      a.subject_id = std::move(h.id);
      a.fs = h.fs;
      a.taps = h.n;
      a.positions = std::move(h.positions);
      r.need(p * 16, "delays");
      a.delays.resize(p);
      for (auto& d : a.delays) {
        const std::size_t at = r.offset();
        d.left = r.f64("delays");
        d.right = r.f64("delays");
        if (!(d.left >= 0.0) || !(d.right >= 0.0) || !std::isfinite(d.left) || !std::isfinite(d.right))
          throw FormatError("delay must be finite and nonnegative", at);
      }
      a.spectra = read_spectra(r, p * 2 * bins);
      out = std::move(a);
      break;
    }
    case ContainerKind::kMeanEnvelope: {
      MeanEnvelope m;
      m.fs = h.fs;
      m.taps = h.n;
      m.positions = std::move(h.positions);
      m.mean = read_spectra(r, p * 2 * bins);
      out = std::move(m);
      break;
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after payload", r.offset());
  return out;
}

void save_container(const std::string& path, const Container& c) { detail::write_file(path, encode_container(c)); }

Container load_container(const std::string& path) {
  const auto bytes = detail::read_file(path);
  return decode_container(bytes);
}

namespace {
template <class T>
T load_kind(const std::string& path, const char* expected) {
  auto c = load_container(path);
  if (auto* v = std::get_if<T>(&c)) return std::move(*v);
  throw FormatError(path + ": expected a " + expected + " container", 12);
}
}  // namespace

HrtfSet load_hrtf_set(const std::string& path) { return load_kind<HrtfSet>(path, "raw HRIR (kind 0)"); }
AlignedSet load_aligned_set(const std::string& path) { return load_kind<AlignedSet>(path, "aligned (kind 1)"); }
MeanEnvelope load_mean_envelope(const std::string& path) {
  return load_kind<MeanEnvelope>(path, "mean envelope (kind 2)");
}

ContainerKind peek_container_kind(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes.data(), bytes.size());
  return read_header(r).kind;
}

DatasetSplit DatasetSplit::hutubs() {
  DatasetSplit s;
  s.validate = {4, 28, 30, 53, 65};
  s.test = {1, 18, 27, 67};
  s.discarded = {88, 96};
  for (int id = 1; id <= 96; ++id)
    if (!s.role_of(id)) s.train.push_back(id);
  return s;
}

void DatasetSplit::check_disjoint() const {
  std::set<int> seen;
  for (const auto* list : {&train, &validate, &test, &discarded})
    for (int id : *list)
      if (!seen.insert(id).second) throw DataError("subject " + std::to_string(id) + " appears in more than one split");
}

std::optional<std::string> DatasetSplit::role_of(int id) const {
  auto has = [id](const std::vector<int>& v) { return std::find(v.begin(), v.end(), id) != v.end(); };
  if (has(train)) return "train";
  if (has(validate)) return "validate";
  if (has(test)) return "test";
  if (has(discarded)) return "discarded";
  return std::nullopt;
}

std::string DatasetSplit::to_json() const {
  nlohmann::ordered_json j;
  j["train"] = train;
  j["validate"] = validate;
  j["test"] = test;
  j["discarded"] = discarded;
  return j.dump(2) + "\n";
}

DatasetSplit DatasetSplit::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("split manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("split manifest must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "train" && key != "validate" && key != "test" && key != "discarded")
      throw DataError("unknown split manifest key '" + key + "'");
  DatasetSplit s;
  auto read = [&](const char* key, std::vector<int>& out) {
    if (!j.contains(key)) throw DataError(std::string("split manifest lacks '") + key + "'");
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw DataError(std::string("split manifest '") + key + "' must be an array");
    for (const auto& v : arr) {
      if (!v.is_number_integer()) throw DataError(std::string("split manifest '") + key + "' holds a non-integer");
      out.push_back(v.get<int>());
    }
  };
  read("train", s.train);
  read("validate", s.validate);
  read("test", s.test);
  read("discarded", s.discarded);
  s.check_disjoint();
  return s;
}

DatasetSplit DatasetSplit::load(const std::string& path) {
  const auto bytes = detail::read_file(path);
  return from_json(std::string(bytes.begin(), bytes.end()));
}

void DatasetSplit::save(const std::string& path) const {
  const auto text = to_json();
  detail::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::optional<int> subject_number(const std::string& subject_id) {
  std::size_t start = subject_id.size();
  while (start > 0 && std::isdigit(static_cast<unsigned char>(subject_id[start - 1]))) --start;
  if (start == subject_id.size() || subject_id.size() - start > 9) return std::nullopt;
  return std::stoi(subject_id.substr(start));
}

namespace {
void check_grid(const std::vector<UnitVec3>& a, std::size_t taps_a, const std::vector<UnitVec3>& b,
                std::size_t taps_b, const std::string& who) {
  if (taps_a != taps_b) throw GridError(who + ": tap counts differ");
  if (a != b) throw GridError(who + ": position grids differ");
}
}  // namespace

MeanEnvelope compute_mean_envelope(std::span<const AlignedSet> train_sets) {
  if (train_sets.empty()) throw ArgumentError("mean envelope needs at least one subject");
  const auto& first = train_sets.front();
  MeanEnvelope m;
  m.fs = first.fs;
  m.taps = first.taps;
  m.positions = first.positions;
  m.mean.assign(first.spectra.size(), Complex{});
  for (const auto& s : train_sets) {
    check_grid(first.positions, first.taps, s.positions, s.taps, "subject " + s.subject_id);
    if (s.spectra.size() != m.mean.size()) throw GridError("subject " + s.subject_id + ": spectrum shape differs");
    for (std::size_t i = 0; i < m.mean.size(); ++i) m.mean[i] += s.spectra[i];
  }
  const double inv = 1.0 / static_cast<double>(train_sets.size());
  for (auto& v : m.mean) v *= inv;
  return m;
}

AlignedSet center(const AlignedSet& set, const MeanEnvelope& mean) {
  check_grid(mean.positions, mean.taps, set.positions, set.taps, "subject " + set.subject_id);
  AlignedSet out = set;
  for (std::size_t i = 0; i < out.spectra.size(); ++i) out.spectra[i] -= mean.mean[i];
  return out;
}

AlignedSet uncenter(const AlignedSet& residual, const MeanEnvelope& mean) {
  check_grid(mean.positions, mean.taps, residual.positions, residual.taps, "subject " + residual.subject_id);
  AlignedSet out = residual;
  for (std::size_t i = 0; i < out.spectra.size(); ++i) out.spectra[i] += mean.mean[i];
  return out;
}

}  // namespace hrtfnp
