#include "sokid/error.hpp"

namespace sokid {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse:
      return "parse";
    case ErrorKind::validation:
      return "validation";
    case ErrorKind::io:
      return "io";
    case ErrorKind::numerical:
      return "numerical";
    case ErrorKind::solver:
      return "solver";
    case ErrorKind::config:
      return "config";
  }
  return "unknown";
}

}  // namespace sokid
