#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace simix {

enum class ErrorKind {
  invalid_bandwidth,
  invalid_argument,
  empty_data,
  degenerate_span,
  shape,
  starved_neighborhood,
  degenerate_index,
  rank_deficiency,
  slicing,
  component_collapse,
  domain,
  too_many_failures,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so callers (the CLI,
// the replication harness) can decide how to react without parsing text.
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

}  // namespace simix
