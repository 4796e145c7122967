#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segtrack {

enum class ErrorCode {
  kNoForeground,
  kPeakOutOfBounds,
  kDegenerateRegion,
  kBadResolution,
  kEmptyForeground,
  kEmptyBackground,
  kShapeMismatch,
  kChannelMismatch,
  kNonFiniteLoss,
  kNonPositiveScale,
  kEmptyTarget,
  kInitDiverged,
  kInvalidConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

// All recoverable failures in the library surface as this exception; callers
// branch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoForeground: return "NoForeground";
    case ErrorCode::kPeakOutOfBounds: return "PeakOutOfBounds";
    case ErrorCode::kDegenerateRegion: return "DegenerateRegion";
    case ErrorCode::kBadResolution: return "BadResolution";
    case ErrorCode::kEmptyForeground: return "EmptyForeground";
    case ErrorCode::kEmptyBackground: return "EmptyBackground";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kChannelMismatch: return "ChannelMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNonPositiveScale: return "NonPositiveScale";
    case ErrorCode::kEmptyTarget: return "EmptyTarget";
    case ErrorCode::kInitDiverged: return "InitDiverged";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace segtrack
