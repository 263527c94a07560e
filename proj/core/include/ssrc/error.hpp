#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssrc {

enum class ErrorCode {
  // tensor-autograd
  kShapeMismatch,
  kEmptyInput,
  kNonScalarLoss,
  kBackwardBeforeForward,
  kNonFinite,
  kInvalidArgument,
  // nn-layers
  kChannelMismatch,
  kKernelTooLarge,
  kExtentTooSmall,
  kEmptyClass,
  kLabelOutOfRange,
  // model-zoo
  kInvalidConfig,
  kBandCountMismatch,
  // hsi-data
  kBadMagic,
  kTruncated,
  kMalformed,
  kNonIncreasingWavelengths,
  kReflectanceOutOfRange,
  kEmptyColorBin,
  kLesionTooSmall,
  kInfeasibleQuota,
  // eval-stats
  kSingleClass,
  kUnpaired,
  kUnknownMode,
  // io
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Exit-status category the command-line tool maps an error onto.
enum class ErrorCategory { kUsage = 1, kData = 2, kNumerical = 3 };

ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace ssrc
