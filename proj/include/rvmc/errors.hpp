#pragma once

#include <stdexcept>
#include <string>

namespace rvmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (Hermiticity, PSD, trace, shapes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A floating point result failed an integrity check (e.g. imaginary residue).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Requested size exceeds what dense enumeration supports.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Zero-probability measurement branch or vanishing normalization.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace rvmc
