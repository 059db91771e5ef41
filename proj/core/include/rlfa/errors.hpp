#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rlfa {

enum class ErrorKind {
  validation,
  format,
  configuration,
  degenerate_distribution,
  impossible_draw,
  sequencing,
  exhausted,
  invariant,
  not_found,
  io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a machine-readable kind so
// front ends (CLI exit codes, HTTP status mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rlfa
