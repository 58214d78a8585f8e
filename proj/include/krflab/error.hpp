#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace krf {

enum class ErrorCode {
  PositivityLoss,
  ProfileInfeasible,
  ClosureViolation,
  DegenerateMetric,
  GridMismatch,
  SolveFailure,
  StepRejected,
  DtUnderflow,
  RangeError,
  QuadratureFailure,
  NegativityDetected,
  ZeroDenominator,
  ConstraintViolated,
  DescentStalled,
  InsufficientSamples,
  VersionMismatch,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code name.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace krf
