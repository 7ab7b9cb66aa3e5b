#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zebra {

// Raised when a caller passes arguments that violate an operation's contract.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed text input (CSV rows, mask files, manifests). `line` is 1-based,
// 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two detectors returned different event sets for the same store and mask.
class DetectorMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace zebra
