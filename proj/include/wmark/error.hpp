#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wmark {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  CorruptData,
  IoFailure,
  InvalidImage,
  DimensionMismatch,
  ImageTooSmall,
  BandOutOfRange,
  LengthMismatch,
  RangeOverflow,
  MessageOutOfRange,
  CapacityExceeded,
  InvalidParams,
  RegistryUnavailable,
  StoreLocked,
  StoreUnavailable,
  RegistrationFailed,
  InvalidSpec,
  EmptyCorpus,
  SelfTestFailed,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wmark
