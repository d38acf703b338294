#include "fairpoison/error.hpp"

namespace fairpoison {

const char* ErrorKindName(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "invalid argument";
    case ErrorKind::kIo:
      return "I/O error";
    case ErrorKind::kParse:
      return "parse error";
    case ErrorKind::kNumeric:
      return "numeric error";
    case ErrorKind::kConvergence:
      return "convergence failure";
  }
  return "error";
}

}  // namespace fairpoison
