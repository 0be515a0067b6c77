#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corebox {

enum class ErrorCode {
  FileNotFound,
  DecodeError,
  IoError,
  UnknownLabelValue,
  ParseError,
  DuplicateValue,
  ValueOutOfRange,
  InvalidTarget,
  InvalidArgument,
  EmptyDataset,
  DimensionMismatch,
  InvalidBeta,
  EmptyInput,
  EmptyPool,
  EmptySample,
  SameSegment,
  ClassMismatch,
  BoxOutOfBounds,
  DegenerateSpec,
  NonPositiveInterval,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace corebox
