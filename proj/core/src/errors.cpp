#include "rlfa/errors.hpp"

namespace rlfa {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::format: return "format";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::degenerate_distribution: return "degenerate_distribution";
    case ErrorKind::impossible_draw: return "impossible_draw";
    case ErrorKind::sequencing: return "sequencing";
    case ErrorKind::exhausted: return "exhausted";
    case ErrorKind::invariant: return "invariant";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace rlfa
