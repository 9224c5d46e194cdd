#pragma once

#include <stdexcept>
#include <string>

namespace relkit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform (matmul inner dims, broadcast target, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A forward op produced NaN/Inf, or an op was fed a value outside its domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed corpus / vocab / checkpoint / config input.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace relkit
