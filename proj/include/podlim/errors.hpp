#pragma once

#include <stdexcept>
#include <string>

namespace podlim {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or index shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of the operation (zero polynomial, algebraic loop, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Iterative kernel failed to converge or produced non-finite output.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Evaluation point coincides with a pole.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a Hurwitz system.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Physical or design parameter violates its invariants.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Closed form or algorithm does not cover the requested configuration.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (e.g. unrotated mode, unstable filter).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Scenario / configuration problems surfaced by the CLI with exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace podlim
