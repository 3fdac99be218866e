#include "mfnet/error.hpp"

namespace mfnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RowSumExceedsOne: return "RowSumExceedsOne";
    case ErrorCode::SpectralRadiusNotSubcritical: return "SpectralRadiusNotSubcritical";
    case ErrorCode::RateConditionViolated: return "RateConditionViolated";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EmptyQueue: return "EmptyQueue";
    case ErrorCode::PositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::TruncationTooLarge: return "TruncationTooLarge";
    case ErrorCode::TruncationMismatch: return "TruncationMismatch";
    case ErrorCode::KappaNotSubcritical: return "KappaNotSubcritical";
    case ErrorCode::StepSizeUnstable: return "StepSizeUnstable";
    case ErrorCode::NoConvergenceWithinHorizon: return "NoConvergenceWithinHorizon";
    case ErrorCode::WindowEmpty: return "WindowEmpty";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
  }
  return "Unknown";
}

}  // namespace mfnet
