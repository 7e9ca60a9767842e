#pragma once

#include <stdexcept>
#include <string>

namespace scaled_poisson {

// Malformed input: empty lists, nonpositive entries, parameters out of range.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a function (rate <= 0, y < lambda).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Result not representable or not certifiable in double precision.
struct NumericalRangeError : std::range_error {
  using std::range_error::range_error;
};

// A function was evaluated at a point where it is not defined (e.g. outside a table).
struct EvaluationError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

}  // namespace scaled_poisson
