#pragma once

#include <stdexcept>
#include <string>

namespace replaysim {

// Base class for every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on an argument (empty signal, bad geometry, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// Malformed or unsupported file contents (WAV headers, grid documents).
class FormatError : public Error {
public:
  using Error::Error;
};

// Bad or inconsistent run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Missing or unusable corpus inputs.
class CorpusError : public Error {
public:
  using Error::Error;
};

// Numerical procedure could not produce a result (e.g. decay range too short).
class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace replaysim
