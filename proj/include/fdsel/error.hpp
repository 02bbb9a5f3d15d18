#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdsel {

enum class ErrorCode {
  // input / ingestion
  EmptyGroup,
  UncoveredGridPoint,
  NonFiniteValue,
  InvalidGrid,
  InvalidMask,
  ParseError,
  GridMismatch,
  IoFailure,
  // numerical
  FactorizationFailure,
  TooFewPoints,
  SingularLocalFit,
  DegenerateKnots,
  SingularSystem,
  AllFitsFailed,
  DegenerateResample,
  // configuration
  InvalidConfig,
  InvalidAlpha,
  UnknownPreset,
};

std::string_view to_string(ErrorCode code);

enum class ErrorCategory { Input, Numerical, Config };

ErrorCategory category(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, std::string(to_string(code)) + ": " + msg);
}

}  // namespace fdsel
