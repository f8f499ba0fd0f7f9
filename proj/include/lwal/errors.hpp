#pragma once

#include <stdexcept>
#include <string>

namespace lwal {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes or dimensions do not line up.
class ShapeError : public Error {
  public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Input value outside an operation's domain (log of non-positive, NaN input, ...).
class DomainError : public Error {
  public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration (zero dimensions, bad key, inconsistent settings).
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// API misuse (backward on a consumed tape, non-scalar root, ...).
class UsageError : public Error {
  public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Problems reading or writing datasets and other external files.
class DataError : public Error {
  public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// A computation produced a non-finite value.
class NumericError : public Error {
  public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

} // namespace lwal
