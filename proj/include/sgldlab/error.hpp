#pragma once

#include <stdexcept>
#include <string>

namespace sgldlab {

/// A parameter is outside its admissible domain (nonpositive modulus, k > n, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was called outside the range where its formula is valid.
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or schema-violating experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgldlab
