#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace famix {

/// Category of a toolkit failure. The CLI serializes this into its error record.
enum class ErrorKind {
  kInvalidInput,
  kShape,
  kDomain,
  kPartition,
  kDegenerateSignal,
  kDegenerateBatch,
  kConfiguration,
  kIo,
  kLoad,
  kMissingStyle,
  kUndefinedMetric,
  kDivergence,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct InvalidInputError : Error {
  explicit InvalidInputError(const std::string& m) : Error(ErrorKind::kInvalidInput, m) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error(ErrorKind::kShape, m) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error(ErrorKind::kDomain, m) {}
};
struct PartitionError : Error {
  explicit PartitionError(const std::string& m) : Error(ErrorKind::kPartition, m) {}
};
struct DegenerateSignalError : Error {
  explicit DegenerateSignalError(const std::string& m) : Error(ErrorKind::kDegenerateSignal, m) {}
};
struct DegenerateBatchError : Error {
  explicit DegenerateBatchError(const std::string& m) : Error(ErrorKind::kDegenerateBatch, m) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::kConfiguration, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::kIo, m) {}
};
struct LoadError : Error {
  explicit LoadError(const std::string& m) : Error(ErrorKind::kLoad, m) {}
};
struct MissingStyleError : Error {
  explicit MissingStyleError(const std::string& m) : Error(ErrorKind::kMissingStyle, m) {}
};
struct UndefinedMetricError : Error {
  explicit UndefinedMetricError(const std::string& m) : Error(ErrorKind::kUndefinedMetric, m) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t iteration, const std::string& m)
      : Error(ErrorKind::kDivergence, m), iteration_(iteration) {}
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::int64_t iteration_;
};

}  // namespace famix
