#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lfg {

/// Machine-readable failure codes. Each code belongs to exactly one category,
/// which the CLI maps onto its process exit status.
enum class ErrorCode {
  // validation: the caller handed us something malformed
  kInvalidArgument,
  kShapeMismatch,
  kNotOrthonormal,
  kOutOfDomain,
  kNonFinite,
  kBadMagic,
  kUnsupportedVersion,
  kBadDtypeCode,
  kDtypeMismatch,
  kTruncated,
  kTrailingData,
  kIo,
  kBadManifest,
  kBadConfig,
  kBadScene,
  // computation: inputs were well-formed but the requested quantity is undefined
  kDegenerateInput,
  kSingularSystem,
  kUnusableTrack,
  kGradientCheckFailed,
};

enum class ErrorCategory { kValidation, kComputation };

ErrorCategory category_of(ErrorCode code);
std::string_view code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace lfg
