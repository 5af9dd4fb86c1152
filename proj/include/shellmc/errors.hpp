#pragma once

#include <stdexcept>
#include <string>

namespace shellmc {

// Base class for everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Ei evaluated so close to its logarithmic singularity at zero that the
// result is not representable.
class OverflowToNegInfinity : public Error {
 public:
  using Error::Error;
};

// Non-finite or sign-violating value produced where the construction
// guarantees otherwise; signals a mesh or assembly bug upstream.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Importance value of zero (or clamped) in a cell the biased walk can reach.
class DegenerateImportance : public Error {
 public:
  using Error::Error;
};

// Diagnostic guard: a single history exceeded the event budget.
class EventLoopStall : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

class QuadratureNonConvergence : public Error {
 public:
  using Error::Error;
};

// Point evaluation requested exactly at an integrable singularity.
class SingularPoint : public Error {
 public:
  using Error::Error;
};

}  // namespace shellmc
