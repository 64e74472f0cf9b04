#pragma once

#include <stdexcept>
#include <string>

namespace cad {

enum class ErrorCode {
  InvalidInput,
  InvalidClassCount,
  NotADistribution,
  GridMismatch,
  InvalidThreshold,
  EmptyRegion,
  NoPlacement,
  Shape,
  Bounds,
  InvalidIteration,
  InvalidConfig,
  UndefinedMetric,
  UnsupportedLoss,
  MissingComponent,
  Divergence,
  MalformedFile,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the engine carries a code so front ends can map it
/// to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cad
