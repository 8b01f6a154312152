#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hrtfnp/hrtf_signal.hpp"
#include "hrtfnp/sphere_geom.hpp"

namespace hrtfnp {

/// One subject's raw binaural impulse responses. Taps are stored
/// position-major: taps[(p * 2 + ear) * N + n].
struct HrtfSet {
  std::string subject_id;
  double fs = 0.0;
  std::size_t taps = 0;
  std::vector<UnitVec3> positions;
  std::vector<double> data;

  std::size_t size() const { return positions.size(); }
  Hrir hrir(std::size_t p) const;
  void set_hrir(std::size_t p, const Hrir& h);
};

/// Pure delays and time-aligned (or residual) spectra per position.
/// spectra[(p * 2 + ear) * F + f], F = N/2 + 1.
struct AlignedSet {
  std::string subject_id;
  double fs = 0.0;
  std::size_t taps = 0;
  std::vector<UnitVec3> positions;
  std::vector<PureDelay> delays;
  std::vector<Complex> spectra;

  std::size_t size() const { return positions.size(); }
  std::size_t bins() const { return taps / 2 + 1; }
  Complex& at(std::size_t p, std::size_t ear, std::size_t f) { return spectra[(p * 2 + ear) * bins() + f]; }
  const Complex& at(std::size_t p, std::size_t ear, std::size_t f) const {
    return spectra[(p * 2 + ear) * bins() + f];
  }
};

/// Per-position mean of the time-aligned spectra over training subjects.
struct MeanEnvelope {
  double fs = 0.0;
  std::size_t taps = 0;
  std::vector<UnitVec3> positions;
  std::vector<Complex> mean;

  std::size_t size() const { return positions.size(); }
  std::size_t bins() const { return taps / 2 + 1; }
};

enum class ContainerKind : std::uint8_t { kRawHrir = 0, kAligned = 1, kMeanEnvelope = 2 };

using Container = std::variant<HrtfSet, AlignedSet, MeanEnvelope>;

// Binary container, little-endian:
//   "HRTF-NP1", u32 version (1), u8 kind, u32 id length, id bytes, f64 fs,
//   u32 N, u32 P, P x 3 f64 positions, then
//   kind 0: P x 2 x N f32 taps
//   kind 1: P x 2 f64 delays, P x 2 x (N/2+1) x 2 f32 (re, im)
//   kind 2: P x 2 x (N/2+1) x 2 f32 (re, im)
// Samples are narrowed to f32 on save.

std::vector<std::uint8_t> encode_container(const Container& c);
/// Throws FormatError (with the failing byte offset) on any malformed input.
Container decode_container(std::span<const std::uint8_t> bytes);

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

/// Typed loaders; a container of another kind is a FormatError.
HrtfSet load_hrtf_set(const std::string& path);
AlignedSet load_aligned_set(const std::string& path);
MeanEnvelope load_mean_envelope(const std::string& path);

/// Kind byte of a container file without decoding the payload.
ContainerKind peek_container_kind(const std::string& path);

/// Subject bookkeeping. Ids are the integer subject numbers.
struct DatasetSplit {
  std::vector<int> train, validate, test, discarded;

  /// The HUTUBS split: validate {4, 28, 30, 53, 65}, test {1, 18, 27, 67},
  /// discarded {88, 96} (duplicates of 22 and 1), train the remaining ids of 1..96.
  static DatasetSplit hutubs();

  /// Throws DataError when any two lists share an id or a list repeats one.
  void check_disjoint() const;

  /// "train", "validate", "test", "discarded" or nullopt.
  std::optional<std::string> role_of(int id) const;

  std::string to_json() const;
  /// Throws DataError on schema violations and overlapping lists.
  static DatasetSplit from_json(const std::string& text);
  static DatasetSplit load(const std::string& path);
  void save(const std::string& path) const;
};

/// Integer formed by the trailing digits of a subject id ("pp12" -> 12).
std::optional<int> subject_number(const std::string& subject_id);

/// Complex mean over subjects, per position, ear and bin. Throws
/// ArgumentError when empty and GridError when positions or shapes differ.
MeanEnvelope compute_mean_envelope(std::span<const AlignedSet> train_sets);

/// Residual y = m - mean. Delays are carried over. Throws GridError on a
/// position or shape mismatch.
AlignedSet center(const AlignedSet& set, const MeanEnvelope& mean);
/// Inverse of center.
AlignedSet uncenter(const AlignedSet& residual, const MeanEnvelope& mean);

}  // namespace hrtfnp
