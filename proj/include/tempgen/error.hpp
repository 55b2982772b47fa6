#pragma once

#include <stdexcept>
#include <string>

namespace tempgen {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { Usage = 1, Config = 2, Data = 3, Runtime = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class RuntimeFailure : public Error {
 public:
  explicit RuntimeFailure(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

}  // namespace tempgen
