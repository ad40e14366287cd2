#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace faros {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operand that must be nonzero was the zero vector.
class ZeroVectorError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// A reduction or selection was asked to operate on too few elements.
class EmptySetError : public Error {
 public:
  using Error::Error;
};

/// The mean of a vector set collapsed to zero, so cosine geometry against it
/// is undefined.
class DegenerateCentroidError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or argument combination. `key()` names the
/// offending configuration key when one is known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed input file. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class NoEligibleExamplesError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace faros
