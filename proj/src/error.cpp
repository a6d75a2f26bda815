#include "ssc/error.hpp"

namespace ssc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::ShapeMismatch: return "shape mismatch";
    case ErrorCode::AxisOutOfRange: return "axis out of range";
    case ErrorCode::BadMagic: return "bad magic";
    case ErrorCode::UnsupportedVersion: return "unsupported version";
    case ErrorCode::Truncated: return "truncated file";
    case ErrorCode::ChecksumMismatch: return "checksum mismatch";
    case ErrorCode::CountMismatch: return "count mismatch";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::NonFinite: return "non-finite value";
  }
  return "unknown error";
}

}  // namespace ssc
