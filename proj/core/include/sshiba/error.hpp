#ifndef SSHIBA_ERROR_HPP
#define SSHIBA_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace sshiba {

// Failure classes. The CLI maps each one onto an exit code and prints the
// class name as a machine-parseable prefix.
enum class ErrorKind {
  kInvalidData,
  kNotPositiveDefinite,
  kNegativeRate,
  kAllPruned,
  kDegenerateNormalizer,
  kSingleClass,
  kEmptyColumn,
  kParseError,
  kDomainError,
  kShapeMismatch,
  kVersionMismatch,
  kCorruptRecord,
  kUnknownView,
  kUsage,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace sshiba

#endif  // SSHIBA_ERROR_HPP
