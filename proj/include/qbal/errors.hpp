#pragma once

#include <stdexcept>
#include <string>

namespace qbal {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A departure removed more customers than a queue held. Always a model bug.
class NegativeState : public Error {
 public:
  using Error::Error;
};

/// Queue length left the representable integer range (unstable system).
class StateOverflow : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// An external arrival and a service completion landed on the same instant.
class SimultaneityViolation : public Error {
 public:
  SimultaneityViolation(double time, const std::string& what)
      : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class NonConvergent : public Error {
 public:
  using Error::Error;
};

/// Scenario file rejected. `key()` names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class MissingEstimate : public Error {
 public:
  using Error::Error;
};

class EmptyLog : public Error {
 public:
  using Error::Error;
};

class SingularPoint : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InapplicableAssumption : public Error {
 public:
  using Error::Error;
};

}  // namespace qbal
