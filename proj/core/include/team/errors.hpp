#pragma once

#include <stdexcept>
#include <string>

namespace team {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input dimensions do not match what the model or routine expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, eigensolver breakdown and similar numerical failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid objective, attack or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The operation is not defined for this model (e.g. Hessian through ReLU).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds a configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of the function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on the inputs is violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a structural contract (e.g. non-symmetric Hessian).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, bad header).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File payload shorter or longer than its header declares.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Two inputs that must agree do not (e.g. image and label counts).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by a newer, unknown format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Empty inputs where at least one element is required.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace team
