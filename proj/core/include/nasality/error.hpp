#pragma once

#include <stdexcept>
#include <string>

namespace nasality {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A documented precondition of an operation was violated by its inputs.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Configuration or manifest content failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Reading or writing a file failed, or its contents are malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown during training (non-finite gradients or losses).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace nasality
