#pragma once

#include <stdexcept>
#include <string>

namespace ssc {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  AxisOutOfRange,
  BadMagic,
  UnsupportedVersion,
  Truncated,
  ChecksumMismatch,
  CountMismatch,
  Io,
  NonFinite,
};

const char* to_string(ErrorCode code);

// Every error raised by the library carries a code so callers (the CLI in
// particular) can map failures to exit statuses without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ssc
