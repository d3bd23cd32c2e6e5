#pragma once

#include <stdexcept>
#include <string>

namespace scbf {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kInvalidInput,   // malformed document, bad dimensions, violated preconditions
  kDataMismatch,   // artifacts that do not belong together
  kSolver,         // LP backend failure or numerical breakdown
  kInternal,       // broken invariant inside the pipeline
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_invalid(const std::string& what);
[[noreturn]] void throw_mismatch(const std::string& what);
[[noreturn]] void throw_solver(const std::string& what);
[[noreturn]] void throw_internal(const std::string& what);

}  // namespace scbf
