#pragma once

#include <stdexcept>
#include <string>

namespace redring {

// Failure classes map onto CLI exit codes (see tools/redring_cli.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Window outside the element width, bad widths, and similar index errors.
class RangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class EncodeRangeError : public RangeError {
 public:
  using RangeError::RangeError;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InfeasibleError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class TripleExhaustedError : public Error {
 public:
  using Error::Error;
};

}  // namespace redring
