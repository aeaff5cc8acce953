#pragma once

#include <stdexcept>
#include <string>

namespace steinrul {

// Every toolkit failure derives from Error so the CLI can map it to an exit
// code with a single catch site.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or impossible model geometry. Exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operator applied to tensors with incompatible shapes.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// API misuse, e.g. backward() on a graph that was never evaluated.
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Missing or malformed input files. Exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Parse failure with file/line context.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// NaN/Inf produced during evaluation or training. Exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Process exit code for an exception: 1 config, 2 data, 3 numeric.
int exit_code_for(const std::exception& e);

}  // namespace steinrul
