#include "ssrc/error.hpp"

namespace ssrc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kNonScalarLoss: return "non-scalar-loss";
    case ErrorCode::kBackwardBeforeForward: return "backward-before-forward";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kChannelMismatch: return "channel-mismatch";
    case ErrorCode::kKernelTooLarge: return "kernel-too-large";
    case ErrorCode::kExtentTooSmall: return "extent-too-small";
    case ErrorCode::kEmptyClass: return "empty-class";
    case ErrorCode::kLabelOutOfRange: return "label-out-of-range";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kBandCountMismatch: return "band-count-mismatch";
    case ErrorCode::kBadMagic: return "bad-magic";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kNonIncreasingWavelengths: return "non-increasing-wavelengths";
    case ErrorCode::kReflectanceOutOfRange: return "reflectance-out-of-range";
    case ErrorCode::kEmptyColorBin: return "empty-color-bin";
    case ErrorCode::kLesionTooSmall: return "lesion-too-small";
    case ErrorCode::kInfeasibleQuota: return "infeasible-quota";
    case ErrorCode::kSingleClass: return "single-class";
    case ErrorCode::kUnpaired: return "unpaired";
    case ErrorCode::kUnknownMode: return "unknown-mode";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFinite:
      return ErrorCategory::kNumerical;
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kUnknownMode:
      return ErrorCategory::kUsage;
    default:
      return ErrorCategory::kData;
  }
}

}  // namespace ssrc
