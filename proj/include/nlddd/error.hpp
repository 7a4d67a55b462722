#pragma once

#include <stdexcept>
#include <string>

namespace nlddd {

/// Failure categories. The CLI maps each one onto a distinct exit status.
enum class ErrorCode {
  InvalidArgument,
  InvalidMesh,
  InvalidDecomposition,
  CoverageViolation,
  CollarDeficiency,
  SingularEvaluation,
  SolverFailure,
  DimensionMismatch,
  Config,
  Io,
  CheckFailed,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvalidMesh: return "invalid mesh";
    case ErrorCode::InvalidDecomposition: return "invalid decomposition";
    case ErrorCode::CoverageViolation: return "coverage violation";
    case ErrorCode::CollarDeficiency: return "collar deficiency";
    case ErrorCode::SingularEvaluation: return "singular kernel evaluation";
    case ErrorCode::SolverFailure: return "solver failure";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::Config: return "configuration error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::CheckFailed: return "invariant check failed";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nlddd
