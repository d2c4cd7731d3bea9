#pragma once

#include <stdexcept>
#include <string>

namespace ct {

/// Failure categories surfaced across the library and mapped onto C API
/// status codes and CLI exit codes.
enum class ErrorKind {
  invalid_argument,  // caller violated an operation precondition
  parse,             // malformed input record or file
  invariant,         // well-formed input that breaks a domain invariant
  io,                // filesystem-level failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ct
