#include "foro/error.hpp"

namespace foro {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimension: return "invalid-dimension";
    case ErrorCode::kCovarianceNotPd: return "covariance-not-pd";
    case ErrorCode::kNonFiniteFitness: return "non-finite-fitness";
    case ErrorCode::kEmptyHistory: return "empty-history";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kEmptyBatch: return "empty-batch";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kUninitializedHistory: return "uninitialized-history";
    case ErrorCode::kInvalidDims: return "invalid-dims";
    case ErrorCode::kNonpositiveGamma: return "nonpositive-gamma";
    case ErrorCode::kFactorizationFailure: return "factorization-failure";
    case ErrorCode::kDuplicateClass: return "duplicate-class";
    case ErrorCode::kInvalidSpec: return "invalid-spec";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::kOverlappingClasses: return "overlapping-classes";
    case ErrorCode::kEmptyTestset: return "empty-testset";
    case ErrorCode::kIncompleteMatrix: return "incomplete-matrix";
    case ErrorCode::kCorruptCheckpoint: return "corrupt-checkpoint";
    case ErrorCode::kCorruptFeatureFile: return "corrupt-feature-file";
    case ErrorCode::kReplayViolation: return "replay-violation";
  }
  return "unknown";
}

std::string_view module_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimension:
    case ErrorCode::kCovarianceNotPd:
    case ErrorCode::kNonFiniteFitness:
    case ErrorCode::kEmptyHistory: return "cma";
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kEmptyBatch: return "backbone";
    case ErrorCode::kUninitializedHistory: return "fitness";
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kInvalidDims:
    case ErrorCode::kNonpositiveGamma:
    case ErrorCode::kFactorizationFailure:
    case ErrorCode::kDuplicateClass: return "encoding";
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kMissingFile:
    case ErrorCode::kChecksumMismatch:
    case ErrorCode::kOverlappingClasses:
    case ErrorCode::kEmptyTestset:
    case ErrorCode::kIncompleteMatrix:
    case ErrorCode::kCorruptFeatureFile:
    case ErrorCode::kReplayViolation: return "protocol";
    case ErrorCode::kCorruptCheckpoint: return "cli";
  }
  return "unknown";
}

}  // namespace foro
