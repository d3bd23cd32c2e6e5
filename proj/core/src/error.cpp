#include "scbf/error.hpp"

namespace scbf {

void throw_invalid(const std::string& what) {
  throw Error(ErrorKind::kInvalidInput, what);
}

void throw_mismatch(const std::string& what) {
  throw Error(ErrorKind::kDataMismatch, what);
}

void throw_solver(const std::string& what) {
  throw Error(ErrorKind::kSolver, what);
}

void throw_internal(const std::string& what) {
  throw Error(ErrorKind::kInternal, what);
}

}  // namespace scbf
