#pragma once

#include <stdexcept>
#include <string>

namespace tfsir {

// Base of every error the library throws. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or malformed CSV columns.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Counts that violate compartment invariants (negative, non-conserving).
class DataIntegrityError : public Error {
 public:
  using Error::Error;
};

// Non-contiguous or non-increasing dates.
class GapError : public Error {
 public:
  using Error::Error;
};

// Vector lengths that disagree or are too short.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its mathematical domain (negative rate, etc.).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inconsistent prior specification or latent scales.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Invalid sampler, simulator or study configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Study directory cannot be resumed.
class ResumeError : public Error {
 public:
  using Error::Error;
};

// File system failure (unreadable input, unwritable output).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tfsir
