#include "sshiba/error.hpp"

namespace sshiba {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidData:
      return "InvalidData";
    case ErrorKind::kNotPositiveDefinite:
      return "NotPositiveDefinite";
    case ErrorKind::kNegativeRate:
      return "NegativeRate";
    case ErrorKind::kAllPruned:
      return "AllPruned";
    case ErrorKind::kDegenerateNormalizer:
      return "DegenerateNormalizer";
    case ErrorKind::kSingleClass:
      return "SingleClass";
    case ErrorKind::kEmptyColumn:
      return "EmptyColumn";
    case ErrorKind::kParseError:
      return "ParseError";
    case ErrorKind::kDomainError:
      return "DomainError";
    case ErrorKind::kShapeMismatch:
      return "ShapeMismatch";
    case ErrorKind::kVersionMismatch:
      return "VersionMismatch";
    case ErrorKind::kCorruptRecord:
      return "CorruptRecord";
    case ErrorKind::kUnknownView:
      return "UnknownView";
    case ErrorKind::kUsage:
      return "Usage";
  }
  return "Unknown";
}

void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace sshiba
