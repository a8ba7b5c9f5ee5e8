#pragma once

#include <stdexcept>
#include <string>

namespace phylembed {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating input text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Iterative numerical routine failed (non-convergence, non-finite values).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace phylembed
