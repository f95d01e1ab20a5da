#pragma once

#include <stdexcept>
#include <string>

namespace phi4 {

// A precondition or model invariant is violated (maps to exit code 2).
struct ConstraintError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Two fields live on different lattices, or time grids disagree.
struct MismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// NaN / overflow inside a simulation (maps to exit code 3).
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConstraintError(what);
}

}  // namespace phi4
