#pragma once

#include <stdexcept>
#include <string>

namespace sthyper {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Short machine-readable category, used by the CLI error line.
  virtual const char* kind() const noexcept { return "error"; }
};

/// Malformed or incomplete input data (missing cells, unparsable numbers).
class LoadError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "load"; }
};

/// Timestamps that are not strictly increasing.
class OrderError : public LoadError {
 public:
  using LoadError::LoadError;
  const char* kind() const noexcept override { return "order"; }
};

/// Invalid hyperparameters or configuration combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// A mathematical precondition of an operation was violated
/// (e.g. a matrix that must be row-stochastic is not).
class ContractError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "contract"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

class NormalizationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "normalization"; }
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "divergence"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace sthyper
