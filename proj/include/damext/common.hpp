#pragma once

#include <stdexcept>
#include <string>

namespace damext {

// Exit-code buckets used by the CLI: config 2, data 3, numeric 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Layer/shape problems surface as config errors: they mean an incompatible
// network definition or checkpoint, not a runtime data fault.
struct ShapeError : ConfigError {
  using ConfigError::ConfigError;
};

struct PlacementError : DataError {
  using DataError::DataError;
};

struct RasterIoError : DataError {
  enum class Kind { MalformedHeader, TruncatedPayload, ArityMismatch };
  Kind kind;
  RasterIoError(Kind k, const std::string& msg) : DataError(msg), kind(k) {}
};

}  // namespace damext
