#pragma once

#include <stdexcept>
#include <string>

namespace stifflab {

/// Base of every error raised by the library. The C API maps each subclass
/// to one status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A coefficient was evaluated outside the set where it is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

/// Step-size underflow or overflow of an intermediate quantity.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or coefficient description. `field` is a
/// slash-separated path into the offending document.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A certificate or recipe was asked to run outside its hypotheses.
class InapplicableError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace stifflab
