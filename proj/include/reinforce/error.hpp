#pragma once

#include <stdexcept>
#include <string>

namespace reinforce {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Requested object is larger than a configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Brute-force oracle asked to run above its supported scale.
class SizeError : public Error {
 public:
  using Error::Error;
};

class DisconnectedError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable numerical result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A simulated local time crossed the configured overflow bound.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// A documented invariant failed at run time.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace reinforce
