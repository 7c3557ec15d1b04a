#pragma once

#include <stdexcept>
#include <string>

namespace fredn {

// Base class for every error thrown by the library. The CLI maps the
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration value is outside its valid domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data is missing, malformed or too short.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; `line` is 1-based (0 when unknown).
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, long line) : DataError(what), line(line) {}
  long line = 0;
};

// A one-sided spectrum carries imaginary energy at DC or Nyquist.
class HermitianError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Least-squares fit has too few usable points.
class FitError : public Error {
 public:
  using Error::Error;
};

// Affine parameters cannot be inverted.
class SingularError : public Error {
 public:
  using Error::Error;
};

}  // namespace fredn
