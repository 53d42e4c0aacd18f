#pragma once

#include <stdexcept>
#include <string>

namespace stunet {

// Error categories double as process exit codes for the CLI.
enum class ErrorKind {
  kConfig = 1,
  kData = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

// Invalid user-supplied configuration or a violated call contract.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

// Malformed files, mismatched shapes and degenerate inputs.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what)
      : Error(ErrorKind::kData, what) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& what) : DataError(what) {}
};

class DegenerateInputError : public DataError {
 public:
  explicit DegenerateInputError(const std::string& what) : DataError(what) {}
};

// NaN/Inf encountered, saturation, divergence.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::kNumeric, what) {}
};

}  // namespace stunet
