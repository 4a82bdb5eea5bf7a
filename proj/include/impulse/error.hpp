#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace impulse {

enum class ErrorCode {
  NonPositiveBeta,
  IntegrabilityViolation,
  BadStochasticMatrix,
  EmptyKernelBox,
  NegativeVolatility,
  NegativeProfit,
  LipschitzViolation,
  ParameterOutOfBox,
  NoConvergence,
  GridEscape,
  StateOutOfGrid,
  UnreachableRegime,
  UnsupportedDynamics,
  InsufficientPaths,
  MissingFields,
  FileNotFound,
  ConfigError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. The CLI maps codes to exit
/// statuses; library callers can switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace impulse
