#pragma once

#include <stdexcept>
#include <string>

namespace slfa {

enum class ErrorKind {
  InvalidArgument,
  Shape,
  Domain,
  Design,
  Capacity,
  Diverged,
  Parse,
  Io,
  Config,
};

// Single exception type for the core; the kind is what the C layer maps to a
// status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace slfa
