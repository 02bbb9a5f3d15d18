#include "fdsel/error.hpp"

namespace fdsel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::UncoveredGridPoint: return "UncoveredGridPoint";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::InvalidMask: return "InvalidMask";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::SingularLocalFit: return "SingularLocalFit";
    case ErrorCode::DegenerateKnots: return "DegenerateKnots";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::AllFitsFailed: return "AllFitsFailed";
    case ErrorCode::DegenerateResample: return "DegenerateResample";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
  }
  return "Unknown";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyGroup:
    case ErrorCode::UncoveredGridPoint:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::InvalidGrid:
    case ErrorCode::InvalidMask:
    case ErrorCode::ParseError:
    case ErrorCode::GridMismatch:
    case ErrorCode::IoFailure:
      return ErrorCategory::Input;
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidAlpha:
    case ErrorCode::UnknownPreset:
      return ErrorCategory::Config;
    default:
      return ErrorCategory::Numerical;
  }
}

}  // namespace fdsel
