#pragma once

#include <stdexcept>
#include <string>

namespace culgen {

// Base for everything this library throws. The CLI maps ConfigError to
// exit code 2, TransportError to 3, anything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed values that violate an operation's preconditions.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A run/config file or flag combination is unusable.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Keyed lookup (country, fixture entry, ...) has no entry.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Filesystem problem; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// A client transcript or data file could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A pluggable client failed; retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

// A demographic label fell outside the closed label sets.
class AuditError : public Error {
 public:
  using Error::Error;
};

}  // namespace culgen
