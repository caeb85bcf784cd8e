#pragma once

#include <stdexcept>
#include <string>

namespace rtip {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameter or configuration (maps to a usage error).
struct InvalidParameter : Error {
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

/// An iterative solver failed to converge.
struct ConvergenceError : Error {
  using Error::Error;
};

/// Adaptive mesh refinement hit the node cap before reaching tolerance.
struct RefinementLimit : Error {
  using Error::Error;
};

/// A solve converged, but to the wrong solution branch.
struct WrongBranch : Error {
  using Error::Error;
};

/// A structural assumption about the spectrum/Jacobian does not hold.
struct StructureError : Error {
  using Error::Error;
};

/// Two supposedly-agreeing computations disagree (cross-check failure).
struct InconsistencyError : Error {
  using Error::Error;
};

/// A root bracket does not actually bracket (endpoint classifications wrong).
struct BracketError : Error {
  using Error::Error;
};

/// A bisection could not be resolved within the allowed horizon.
struct UnresolvedBracket : Error {
  UnresolvedBracket(const std::string& what, double lo_, double hi_)
      : Error(what), lo(lo_), hi(hi_) {}
  double lo;
  double hi;
};

/// Truncated domain or time horizon too short for the requested accuracy.
struct TruncationError : Error {
  using Error::Error;
};

/// Step-size underflow in a time integrator.
struct StiffnessError : Error {
  StiffnessError(const std::string& what, double t_) : Error(what), t(t_) {}
  double t;
};

}  // namespace rtip
