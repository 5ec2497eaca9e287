#pragma once

#include <stdexcept>
#include <string>

namespace gridrel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or physically invalid grid case.
class CaseError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration or synthetic spec.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: non-finite input, underflowed tail, singular system.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridrel
