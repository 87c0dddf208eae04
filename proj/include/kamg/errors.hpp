#pragma once

#include <stdexcept>
#include <string>

namespace kamg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or sizes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or record.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input with invalid content (unknown ids, bad arguments).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values (NaN / inf) where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or manifest content that fails version, hash or size checks.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace kamg
