#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfnet {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  RowSumExceedsOne,
  SpectralRadiusNotSubcritical,
  RateConditionViolated,
  SingularSystem,
  EmptyQueue,
  PositionOutOfRange,
  TruncationTooLarge,
  TruncationMismatch,
  KappaNotSubcritical,
  StepSizeUnstable,
  NoConvergenceWithinHorizon,
  WindowEmpty,
  TooFewSamples,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; code() identifies
// the failure class, what() carries the human readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace mfnet
