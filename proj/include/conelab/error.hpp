#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conelab {

enum class ErrorCode {
  DuplicatePosition,
  ZeroVelocity,
  InvalidArgument,
  SyntaxError,
  UnknownSymbol,
  QuadratureFailure,
  DivergentMoment,
  BudgetExceeded,
  TruncationTooLoose,
  OverlappingBoxes,
  InvalidConfig,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicatePosition: return "DuplicatePosition";
    case ErrorCode::ZeroVelocity: return "ZeroVelocity";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::DivergentMoment: return "DivergentMoment";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::TruncationTooLoose: return "TruncationTooLoose";
    case ErrorCode::OverlappingBoxes: return "OverlappingBoxes";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure in the function grammar, carrying the byte offset of the offending token.
class SyntaxError : public Error {
 public:
  SyntaxError(ErrorCode code, std::size_t offset, const std::string& what)
      : Error(code, what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace conelab
