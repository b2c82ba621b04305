#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace basketforge {

/// Malformed basket input. Carries the 1-based line number (0 when the
/// error is not tied to a line, e.g. an empty file).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error(line == 0 ? message
                                     : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid parameters, platform or job configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulated-time violations on the platform (e.g. a clock regression).
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scheduler misuse: switching onto a busy core, unresolvable queue, etc.
class SchedulingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A violated internal invariant (downward closure, ledger coverage, ...).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace basketforge
