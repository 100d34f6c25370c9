#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace planereg {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input data does not satisfy an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

// Scale recovery is degenerate (e.g. the vision trajectory never moves).
class ScaleError : public Error {
 public:
  using Error::Error;
};

// Malformed cloud, trajectory or transform file. line() is 1-based, 0 if
// the failure is not tied to a specific line.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message
                       : message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : Error("config key '" + key + "': " + message), key_(key) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class WriteError : public Error {
 public:
  using Error::Error;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

}  // namespace planereg
