#pragma once

#include <stdexcept>
#include <string>

namespace qbt {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sequence or matrix dimensions inconsistent with the chain length.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Multiplier (k, n) pair or packed ordinal outside its domain.
class IndexDomainError : public Error {
 public:
  using Error::Error;
};

/// Amplitudes that cannot be written as i^(n-1) times a real number.
class GaugeError : public Error {
 public:
  using Error::Error;
};

/// Step size collapsed below the representable minimum.
class StiffnessError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf appeared in an integrated state.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Rank-deficient Jacobian or degenerate least-squares design.
class RankError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A commutator projected onto a basis direction that must vanish did not.
class BasisClosureError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Adjoint gradient disagrees with its finite-difference check.
class AdjointError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; the message names the offending field.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace qbt
