#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace horde {

// Bad experiment or component configuration (dimension mismatch, range
// violation, unknown key).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Bad runtime input such as a NaN observation.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Behaviour policy assigns zero probability to the action it emitted.
class SupportError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Operation called in a state that does not allow it.
class ProtocolError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace horde
