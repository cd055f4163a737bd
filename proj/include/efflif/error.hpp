#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace efflif {

/// Base of every error thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or a divisibility violation.
class dimension_error : public error {
 public:
  using error::error;
};

/// Invalid configuration: bad spec, unsupported mode combination.
class config_error : public error {
 public:
  using error::error;
};

/// Non-finite values, division by zero, divergence.
class numeric_error : public error {
 public:
  using error::error;
};

/// Operation invoked out of order or on an incomplete record.
class state_error : public error {
 public:
  using error::error;
};

/// Bad input data (empty files, labels out of range).
class data_error : public error {
 public:
  using error::error;
};

/// Malformed text input; carries the 1-based line number.
class parse_error : public data_error {
 public:
  parse_error(std::size_t line, const std::string& what)
      : data_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace efflif
