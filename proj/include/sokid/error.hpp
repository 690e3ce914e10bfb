#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sokid {

/// Error classes surfaced to the command line as `error[<class>]: message`.
enum class ErrorKind {
  parse,
  validation,
  io,
  numerical,
  solver,
  config,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sokid
