#include "lfg/error.hpp"

namespace lfg {

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateInput:
    case ErrorCode::kSingularSystem:
    case ErrorCode::kUnusableTrack:
    case ErrorCode::kGradientCheckFailed:
      return ErrorCategory::kComputation;
    default:
      return ErrorCategory::kValidation;
  }
}

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNotOrthonormal: return "not_orthonormal";
    case ErrorCode::kOutOfDomain: return "out_of_domain";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kBadMagic: return "bad_magic";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kBadDtypeCode: return "bad_dtype_code";
    case ErrorCode::kDtypeMismatch: return "dtype_mismatch";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kTrailingData: return "trailing_data";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kBadManifest: return "bad_manifest";
    case ErrorCode::kBadConfig: return "bad_config";
    case ErrorCode::kBadScene: return "bad_scene";
    case ErrorCode::kDegenerateInput: return "degenerate_input";
    case ErrorCode::kSingularSystem: return "singular_system";
    case ErrorCode::kUnusableTrack: return "unusable_track";
    case ErrorCode::kGradientCheckFailed: return "gradient_check_failed";
  }
  return "unknown";
}

}  // namespace lfg
