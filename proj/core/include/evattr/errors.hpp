// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace evattr {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied values was violated.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A data file could not be parsed; the message carries file and line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Maximum-likelihood estimation failed or did not converge.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Too few threshold exceedances to attempt a fit.
class InsufficientExceedancesError : public FitError {
 public:
  using FitError::FitError;
};

/// An uncertainty method cannot be applied to this configuration
/// (e.g. delta method when the counterfactual probability is zero).
class MethodInapplicableError : public Error {
 public:
  using Error::Error;
};

/// A root-search bracket did not contain the solution.
class BracketError : public Error {
 public:
  using Error::Error;
};

}  // namespace evattr
