#ifndef SDCBF_ERRORS_HPP
#define SDCBF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sdcbf {

// All library failures derive from Error so callers that only care about
// "something numerical went wrong" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// f(x)+g(x)u produced a non-finite value.
class ModelError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

class SensitivityError : public Error {
 public:
  using Error::Error;
};

// Reachable-set Picard iteration did not contract.
class EnclosureError : public Error {
 public:
  using Error::Error;
};

class IntervalError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class SynthesisError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdcbf

#endif  // SDCBF_ERRORS_HPP
