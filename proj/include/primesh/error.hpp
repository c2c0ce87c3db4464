#pragma once

#include <stdexcept>
#include <string>

namespace primesh {

/// Raised when a caller breaks an operation's precondition (bad index,
/// mismatched resolution, empty input where one is required, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for malformed files and I/O failures.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace primesh
