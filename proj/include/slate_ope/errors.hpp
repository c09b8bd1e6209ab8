#pragma once

#include <stdexcept>

namespace slate_ope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

class InvalidSlateError : public Error {
 public:
  using Error::Error;
};

class InvalidPolicyError : public Error {
 public:
  using Error::Error;
};

// Target puts mass on an action the logging policy never plays.
class AbsoluteContinuityError : public Error {
 public:
  using Error::Error;
};

// Some slot has zero divergence, so the optimal control variate is singular.
class DegenerateSlotError : public Error {
 public:
  using Error::Error;
};

// Enumeration would exceed the brute-force slate cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace slate_ope
