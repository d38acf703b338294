#pragma once

#include <stdexcept>
#include <string>

namespace fairpoison {

// Categories mirror the status codes exposed by the C API.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kParse,
  kNumeric,
  kConvergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* ErrorKindName(ErrorKind kind) noexcept;

}  // namespace fairpoison
