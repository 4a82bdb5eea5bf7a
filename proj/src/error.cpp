#include "impulse/error.hpp"

namespace impulse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveBeta: return "NonPositiveBeta";
    case ErrorCode::IntegrabilityViolation: return "IntegrabilityViolation";
    case ErrorCode::BadStochasticMatrix: return "BadStochasticMatrix";
    case ErrorCode::EmptyKernelBox: return "EmptyKernelBox";
    case ErrorCode::NegativeVolatility: return "NegativeVolatility";
    case ErrorCode::NegativeProfit: return "NegativeProfit";
    case ErrorCode::LipschitzViolation: return "LipschitzViolation";
    case ErrorCode::ParameterOutOfBox: return "ParameterOutOfBox";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::GridEscape: return "GridEscape";
    case ErrorCode::StateOutOfGrid: return "StateOutOfGrid";
    case ErrorCode::UnreachableRegime: return "UnreachableRegime";
    case ErrorCode::UnsupportedDynamics: return "UnsupportedDynamics";
    case ErrorCode::InsufficientPaths: return "InsufficientPaths";
    case ErrorCode::MissingFields: return "MissingFields";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace impulse
