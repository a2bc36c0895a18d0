#pragma once

#include <stdexcept>
#include <string>

namespace drwave {

// Violated precondition on user-supplied parameters or data.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Evaluation requested at (or too close to) a pole / removable singularity.
class SingularityError : public ValidationError {
 public:
  explicit SingularityError(const std::string& what) : ValidationError(what) {}
};

// A numerical guarantee could not be met (truncation, convergence, internal
// consistency between two evaluation branches, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace drwave
