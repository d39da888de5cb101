#pragma once

#include <stdexcept>
#include <string>

namespace avoidance {

// Raised when an operation needs at least one point and the pattern has none
// (e.g. nearest-neighbor queries, quantization on an empty realization).
class EmptyPatternError : public std::runtime_error {
 public:
  explicit EmptyPatternError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when parameters fall outside the validity region of a formula or
// inequality (e.g. the explicit germ-grain constant at lambda <= (2t)^d).
class OutOfRegimeError : public std::runtime_error {
 public:
  explicit OutOfRegimeError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a variance needed as a denominator is zero (constant samples,
// degenerate functionals).
class DegenerateVarianceError : public std::runtime_error {
 public:
  explicit DegenerateVarianceError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a run-time contract between caller and callee is violated
// (e.g. a thinning intensity exceeding its declared bound).
class ContractViolationError : public std::runtime_error {
 public:
  explicit ContractViolationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace avoidance
