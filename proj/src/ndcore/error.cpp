#include "convmamba/error.hpp"

namespace convmamba {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kParameter: return "parameter error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kMetrics: return "metrics error";
    case ErrorKind::kSplit: return "split error";
    case ErrorKind::kSampler: return "sampler error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kUsage: return "usage error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
      kind_(kind) {}

Error::Error(ErrorKind kind, const std::string& message, std::size_t location,
             bool location_is_line)
    : std::runtime_error(std::string(ErrorKindName(kind)) + " at " +
                         (location_is_line ? "line " : "byte ") +
                         std::to_string(location) + ": " + message),
      kind_(kind) {
  if (location_is_line) {
    line_ = location;
  } else {
    offset_ = location;
  }
}

void Fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

void FailAtOffset(ErrorKind kind, const std::string& message,
                  std::size_t offset) {
  throw Error(kind, message, offset, false);
}

void FailAtLine(ErrorKind kind, const std::string& message, std::size_t line) {
  throw Error(kind, message, line, true);
}

}  // namespace convmamba
