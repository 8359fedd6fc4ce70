// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace surveysim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed numeric input: length mismatch, unnormalized vector, non-finite value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Configuration file or flag that does not fit the expected schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation not supported by the backend (e.g. a gradient step on a frozen model).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Failure reported by a model backend (context overflow, transport failure, ...).
class BackendError : public Error {
 public:
  using Error::Error;
};

/// A question that cannot be rendered (more than 26 options).
class UnsupportedQuestionError : public Error {
 public:
  using Error::Error;
};

}  // namespace surveysim
