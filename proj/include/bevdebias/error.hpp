#pragma once

#include <stdexcept>
#include <string>

namespace bevdebias {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something outside the documented validity domain.
/// The CLI maps this family to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DegenerateProjection : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidDepth : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SingularView : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegenerateBias : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class OvercrowdedSpec : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Unknown file format major version, malformed JSON, missing fields.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bevdebias
