#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace posevolume {

enum class ErrorCode {
  NonPositiveDepth,
  DegenerateRays,
  InvalidRange,
  InvalidArgument,
  KeypointOutsideGrid,
  NonFiniteInput,
  SpecMismatch,
  CountMismatch,
  DegenerateConfiguration,
  TooFewPoints,
  TooFewModelPoints,
  Unplaceable,
  EmptyMask,
  IoError,
  ConfigParseError,
  SchemaMismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the Python bindings) can dispatch on the kind of failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace posevolume
