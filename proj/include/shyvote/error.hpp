#pragma once

#include <stdexcept>
#include <string>

namespace shyvote {

enum class ErrorKind {
  invalid_argument,
  invalid_stimulus_set,
  invalid_config,
  empty_block,
  degenerate_latencies,
  unknown_option,
  missing_answer,
  undefined_correlation,
  no_signal,
  insufficient_data,
  not_found,
  conflict,
  malformed,
  exhausted,
  locked,
  corruption,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::invalid_stimulus_set: return "invalid stimulus set";
    case ErrorKind::invalid_config: return "invalid config";
    case ErrorKind::empty_block: return "empty block";
    case ErrorKind::degenerate_latencies: return "degenerate latencies";
    case ErrorKind::unknown_option: return "unknown option";
    case ErrorKind::missing_answer: return "missing answer";
    case ErrorKind::undefined_correlation: return "undefined correlation";
    case ErrorKind::no_signal: return "no signal";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::not_found: return "not found";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::malformed: return "malformed";
    case ErrorKind::exhausted: return "exhausted";
    case ErrorKind::locked: return "locked";
    case ErrorKind::corruption: return "corruption";
  }
  return "unknown";
}

// All library failures surface as this type; `kind()` is stable for callers
// that need to branch (the HTTP layer maps it onto status codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace shyvote
