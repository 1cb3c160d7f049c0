#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gainlora {

enum class ErrorKind {
  // numerics
  NonSymmetric,
  NonFinite,
  NonScalarLoss,
  ShapeMismatch,
  // subspace / adapter
  DimMismatch,
  ThresholdUnreachable,
  NoFreeSubspace,
  // gating / model input
  EmptyInput,
  IdOutOfRange,
  WindowOverlap,
  // ingestion / configuration
  ParseError,
  SchemaError,
  ConfigError,
  UnknownPreset,
  // continual run
  OrderViolation,
  IncompleteMatrix,
  SingleTask,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Throws Error(kind, message) when the condition does not hold.
inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) [[unlikely]] {
    throw Error(kind, message);
  }
}

}  // namespace gainlora
