#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hrtfnp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid call arguments (sizes, counts, flags).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Shapes of tensors are incompatible for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Requested spherical-harmonic bandwidth does not fit the sampling grid.
class BandwidthError : public Error {
 public:
  using Error::Error;
};

/// Point set has no usable spherical triangulation, or a query is not covered.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Query point lies outside a spherical triangle.
class ContainmentError : public Error {
 public:
  using Error::Error;
};

/// Spectrum with an exactly-zero magnitude bin.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

/// Datasets whose position grids (or split bookkeeping) disagree.
class DataError : public Error {
 public:
  using Error::Error;
};

class GridError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values or failed numerical solves.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public NumericError {
 public:
  ConditioningError(const std::string& what, double condition_estimate)
      : NumericError(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
        condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed container or archive. Carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace hrtfnp
