#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plr {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kUnsupportedFormat,
  kCorruptFile,
  kVersionMismatch,
  kFingerprintMismatch,
  kShapeMismatch,
  kNonFinite,
  kEmptyMask,
  kEmptyBank,
  kEmptyInput,
  kAttemptsExhausted,
  kZeroVector,
  kUnknownLayer,
};

std::string_view to_string(ErrorCode code);

/// Exception type thrown by every plr module. The code lets callers
/// (notably the CLI) distinguish failure classes without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace plr
