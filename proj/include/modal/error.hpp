#pragma once

#include <stdexcept>
#include <string>

namespace modal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed text: formulas, model files, action files, rationals.
struct ParseError : Error {
  using Error::Error;
};

// An operation was applied outside its contract: signature mismatch,
// non-metric input, failed determinism/exhaustivity, oversized state space.
struct PreconditionError : Error {
  using Error::Error;
};

// An enumeration or materialization would exceed the configured budget.
struct BudgetError : Error {
  using Error::Error;
};

}  // namespace modal
