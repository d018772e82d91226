#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace foro {

enum class ErrorCode {
  kInvalidDimension,
  kCovarianceNotPd,
  kNonFiniteFitness,
  kEmptyHistory,
  kInvalidConfig,
  kDimensionMismatch,
  kEmptyBatch,
  kShapeMismatch,
  kUninitializedHistory,
  kInvalidDims,
  kNonpositiveGamma,
  kFactorizationFailure,
  kDuplicateClass,
  kInvalidSpec,
  kMissingFile,
  kChecksumMismatch,
  kOverlappingClasses,
  kEmptyTestset,
  kIncompleteMatrix,
  kCorruptCheckpoint,
  kCorruptFeatureFile,
  kReplayViolation,
};

std::string_view to_string(ErrorCode code);

/// Name of the module that raises `code`, for diagnostics.
std::string_view module_of(ErrorCode code);

/// Every failure raised by the engine carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace foro
