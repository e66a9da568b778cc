#pragma once

#include <stdexcept>
#include <string>

namespace bathy {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input: bad shapes, duplicate stations, malformed specs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Grid coordinate or vector index outside its range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// A problem too large for the dense representation.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Factorization failure, non-finite results.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Bad configuration: unknown keys, missing required artifacts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace bathy
