#pragma once

#include <stdexcept>
#include <string>

#include "keyformer/core/precision.hpp"

KEYFORMER_BEGIN_NAMESPACE

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity produced where only finite values are legal.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Input file does not match the expected columns or record layout.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Evaluation protocol cannot be applied (e.g. too few sessions).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

KEYFORMER_END_NAMESPACE
