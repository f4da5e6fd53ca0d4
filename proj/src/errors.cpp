#include "transprompt/errors.hpp"

namespace transprompt {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Budget: return "budget";
    case ErrorKind::Grammar: return "grammar";
    case ErrorKind::Unparseable: return "unparseable";
    case ErrorKind::OutOfRange: return "out_of_range";
    case ErrorKind::Credential: return "credential";
    case ErrorKind::Transport: return "transport";
  }
  return "unknown";
}

void throw_contract(const std::string& what) { throw Error(ErrorKind::Contract, what); }

}  // namespace transprompt
