#pragma once

#include <stdexcept>
#include <string>

namespace otoc {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at once.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not match (operator dimension, Pauli string length).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Request exceeds the configured size cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Precondition on the input's structure violated (non-Hermitian input,
// operators from different eigenbases).
class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// A formula was requested whose validity rests on an assumption that has
// not been verified for the given data.
class AssumptionError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

// Malformed or corrupted file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace otoc
