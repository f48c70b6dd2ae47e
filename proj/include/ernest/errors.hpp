#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ernest {

// Error categories double as CLI exit codes: 2 config, 3 data, 4 training.
enum class ErrorCategory : int {
  Config = 2,
  Data = 3,
  Training = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorCategory::Config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorCategory::Data, message) {}
};

// Trial-file parsing failure. Kind::Header also covers structurally
// malformed data lines and non-finite voltages.
class ParseError : public DataError {
 public:
  enum class Kind { Header, Incomplete, Duplicate, Label };

  ParseError(Kind kind, const std::string& message)
      : DataError(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDatasetError : public DataError {
 public:
  using DataError::DataError;
};

class SplitError : public DataError {
 public:
  using DataError::DataError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class MetricError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

// Persistence failures (bad magic, version or checksum) and stale
// forward caches.
class CacheError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(std::size_t at, const std::string& message)
      : Error(ErrorCategory::Training, message), at_(at) {}

  // Epoch, channel or ensemble-component index, depending on context.
  std::size_t at() const { return at_; }

 private:
  std::size_t at_;
};

}  // namespace ernest
