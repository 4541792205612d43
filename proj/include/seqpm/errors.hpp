#pragma once

#include <stdexcept>
#include <string>

namespace seqpm {

/// Argument outside the domain of a map, operator or experiment hypothesis.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver exceeded its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The discretized P^n 1 dropped below the division floor. This contradicts
/// the uniform lower bound for the operator family and signals grid breakdown.
class GridBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit schedule asked for a step it does not have.
class ScheduleExhausted : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace seqpm
