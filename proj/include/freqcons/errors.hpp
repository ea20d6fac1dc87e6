#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace freqcons {

/// Bad arguments: zero dimensions, mismatched shapes, non-finite values.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was applied to a value in the wrong state (e.g. shifting a
/// spectrum twice).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content. `offset()` is the byte position where decoding
/// stopped making sense.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// An internal consistency check on numerical results failed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace freqcons
