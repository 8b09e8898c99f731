#pragma once

#include <stdexcept>
#include <string>

namespace handover {

// Attitude representation is within the Euler-angle singularity guard.
class NearSingularError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A linear solve or factorization failed (singular inertia, Jacobian or gain matrix).
class SolveFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The state machine received an observation no outgoing edge accepts.
// This is a harness wiring bug, never a domain event.
class IllegalTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace handover
