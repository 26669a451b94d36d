#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace circspec {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  NonCommensurateShift,
  WindowOutOfDomain,
  WindowTooShort,
  LambdaOnCircle,
  LambdaOnImaginaryAxis,
  IntegrationFailure,
  TimeReversed,
  Resonance,
  CertificationFailure,
  ModuleOverflow,
  EpsilonTooLarge,
  IterationDiverged,
  CutoffActiveAtFixedPoint,
  UnknownCorpusName,
};

/// Machine-parsable token, used on stderr by the CLI.
inline constexpr std::string_view code_token(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::ParseError: return "E_PARSE";
    case ErrorCode::NonCommensurateShift: return "E_NON_COMMENSURATE_SHIFT";
    case ErrorCode::WindowOutOfDomain: return "E_WINDOW_OUT_OF_DOMAIN";
    case ErrorCode::WindowTooShort: return "E_WINDOW_TOO_SHORT";
    case ErrorCode::LambdaOnCircle: return "E_LAMBDA_ON_CIRCLE";
    case ErrorCode::LambdaOnImaginaryAxis: return "E_LAMBDA_ON_IMAGINARY_AXIS";
    case ErrorCode::IntegrationFailure: return "E_INTEGRATION_FAILURE";
    case ErrorCode::TimeReversed: return "E_TIME_REVERSED";
    case ErrorCode::Resonance: return "E_RESONANCE";
    case ErrorCode::CertificationFailure: return "E_CERTIFICATION";
    case ErrorCode::ModuleOverflow: return "E_MODULE_OVERFLOW";
    case ErrorCode::EpsilonTooLarge: return "E_EPSILON_TOO_LARGE";
    case ErrorCode::IterationDiverged: return "E_ITERATION_DIVERGED";
    case ErrorCode::CutoffActiveAtFixedPoint: return "E_CUTOFF_ACTIVE";
    case ErrorCode::UnknownCorpusName: return "E_UNKNOWN_CORPUS";
  }
  return "E_UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(code_token(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace circspec
