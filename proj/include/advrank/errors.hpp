#pragma once
#include <stdexcept>
#include <string>

namespace advrank {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer shape mismatch.
struct ShapeError : Error {
  using Error::Error;
};

// Out-of-range label, empty logits, and similar argument-domain failures.
struct DomainError : Error {
  using Error::Error;
};

// Invalid configuration (unknown architecture, bad hyperparameters, misuse).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input data or file contents.
struct ParseError : Error {
  using Error::Error;
};

// File starts with the wrong magic bytes.
struct BadMagicError : ParseError {
  using ParseError::ParseError;
};

// File format version is not supported.
struct VersionError : ParseError {
  using ParseError::ParseError;
};

// File ended before the declared payload.
struct TruncatedError : ParseError {
  using ParseError::ParseError;
};

// An internal invariant was violated; indicates a bug, not user error.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace advrank
