#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wf {

enum class ErrorCode {
  NonManifold,
  OpenBoundary,
  WrongGenus,
  InconsistentOrientation,
  DegenerateFace,
  ParseError,
  IoError,
  NumericallyDegenerate,
  LengthMismatch,
  NonpositiveVolume,
  ZeroDenominator,
  EnergyCapExceeded,
  LineSearchStalled,
  InsufficientTrace,
  RemeshFailed,
  LevelTooLarge,
  SelfIntersectingRadial,
  SingularFit,
  QuadratureNotConverged,
  RunDiverged,
  GenerationFailed,
  FitResidualTooLarge,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; the code identifies the failure class
/// and the message names the offending element where there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 protected:
  struct Formatted {};
  /// `message` already carries the code prefix.
  Error(ErrorCode code, const std::string& message, Formatted)
      : std::runtime_error(message), code_(code) {}

 private:
  ErrorCode code_;
};

}  // namespace wf
