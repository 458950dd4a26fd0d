#pragma once

#include <stdexcept>
#include <string>

namespace mecontrol {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite entries, malformed files, out-of-range parameters.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidHorizon : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A required optional piece (output matrix, output data) is absent, or the
/// data was recorded under a different initial-state mode than requested.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

/// A structural assumption of an estimator does not hold for the data.
class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

}  // namespace mecontrol
