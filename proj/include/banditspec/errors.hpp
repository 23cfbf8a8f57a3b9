#pragma once

#include <stdexcept>
#include <string>

namespace banditspec {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration, detected before any simulation runs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Operation called in a state that does not admit it (e.g. stepping a finished episode).
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace banditspec
