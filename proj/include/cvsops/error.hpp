#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvsops {

// Error classes raised across the platform. The name of each value is what
// appears in the structured error log and in HTTP error bodies.
enum class Errc {
  kIllegalTransition,
  kDuplicateRater,
  kChainClosed,
  kNotQualified,
  kWindowUnderflow,
  kIncompleteAnswers,
  kUnknownAssignment,
  kDuplicateAssessment,
  kMissingAssessments,
  kShapeMismatch,
  kNoPositives,
  kMissingClip,
  kMissingFrame,
  kEmptyVariants,
  kEmptySplit,
  kProtocolError,
  kTimeout,
  kLengthMismatch,
  kMisalignedTeams,
  kSequenceGap,
  kCorruptSnapshot,
  kInvalidConfig,
  kDeadlockDetected,
  kInvalidInput,
  kNotFound,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kIllegalTransition: return "IllegalTransition";
    case Errc::kDuplicateRater: return "DuplicateRater";
    case Errc::kChainClosed: return "ChainClosed";
    case Errc::kNotQualified: return "NotQualified";
    case Errc::kWindowUnderflow: return "WindowUnderflow";
    case Errc::kIncompleteAnswers: return "IncompleteAnswers";
    case Errc::kUnknownAssignment: return "UnknownAssignment";
    case Errc::kDuplicateAssessment: return "DuplicateAssessment";
    case Errc::kMissingAssessments: return "MissingAssessments";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kNoPositives: return "NoPositives";
    case Errc::kMissingClip: return "MissingClip";
    case Errc::kMissingFrame: return "MissingFrame";
    case Errc::kEmptyVariants: return "EmptyVariants";
    case Errc::kEmptySplit: return "EmptySplit";
    case Errc::kProtocolError: return "ProtocolError";
    case Errc::kTimeout: return "Timeout";
    case Errc::kLengthMismatch: return "LengthMismatch";
    case Errc::kMisalignedTeams: return "MisalignedTeams";
    case Errc::kSequenceGap: return "SequenceGap";
    case Errc::kCorruptSnapshot: return "CorruptSnapshot";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kDeadlockDetected: return "DeadlockDetected";
    case Errc::kInvalidInput: return "InvalidInput";
    case Errc::kNotFound: return "NotFound";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cvsops
