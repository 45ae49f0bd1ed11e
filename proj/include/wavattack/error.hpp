#pragma once

#include <stdexcept>
#include <string>

namespace wavattack {

// Base for every error raised by the library. Callers that only care about
// "something went wrong" catch this; the subclasses carry the category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes disagree with an op signature or a binding.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A forward pass produced a non-finite intermediate value.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// An object was used out of order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File content that cannot be read as the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace wavattack
