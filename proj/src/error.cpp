#include "specguard/error.hpp"

namespace specguard {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Size: return "size";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Decomposition: return "decomposition";
    case ErrorKind::Training: return "training";
    case ErrorKind::State: return "state";
    case ErrorKind::DegenerateModel: return "degenerate-model";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace specguard
