#pragma once

#include <stdexcept>
#include <string>

namespace roverloc {

enum class ErrorCode {
  kNonFinite,
  kInvalidArgument,
  kDegenerateSample,
  kZeroVector,
  kNotARotation,
  kNotInvertible,
  kTooFewPoints,
  kAllCollinear,
  kDuplicatePoints,
  kOutsideHull,
  kDegenerateTriangle,
  kNonPositiveDisparity,
  kTooFewRocks,
  kNoConsensus,
  kSingularNormalMatrix,
  kDegenerateConfiguration,
  kEmptyVisibleSet,
  kFrameMismatch,
  kParse,
  kIo,
};

inline const char* ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDegenerateSample: return "DegenerateSample";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kNotARotation: return "NotARotation";
    case ErrorCode::kNotInvertible: return "NotInvertible";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kAllCollinear: return "AllCollinear";
    case ErrorCode::kDuplicatePoints: return "DuplicatePoints";
    case ErrorCode::kOutsideHull: return "OutsideHull";
    case ErrorCode::kDegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::kNonPositiveDisparity: return "NonPositiveDisparity";
    case ErrorCode::kTooFewRocks: return "TooFewRocks";
    case ErrorCode::kNoConsensus: return "NoConsensus";
    case ErrorCode::kSingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kEmptyVisibleSet: return "EmptyVisibleSet";
    case ErrorCode::kFrameMismatch: return "FrameMismatch";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

// All library failures are reported through this type; code() identifies the
// failure class so callers (and the CLI exit-code map) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ToString(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace roverloc
