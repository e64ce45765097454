#pragma once

#include <stdexcept>
#include <string>

namespace mfsc {

// Configuration text could not be parsed at all.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration parsed but violates a model invariant. The message names
// the offending field, e.g. "clusters[1].R not positive definite".
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A backward Riccati sweep produced a non-finite entry.
class SolverDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A forward simulation or estimator produced a non-finite state.
class SimulationDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Request exceeds the brute-force oracle's size guard.
class SizeGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfsc
