#pragma once

#include <stdexcept>
#include <string>

namespace vol {

// Bad argument values (orders, sizes, ranges).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvalidMaterial : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Raised when a Krylov step meets a non-positive curvature pTKp.
class SolverBreakdown : public std::runtime_error {
 public:
  explicit SolverBreakdown(const std::string& what, long sample = -1)
      : std::runtime_error(sample >= 0 ? what + " (sample " + std::to_string(sample) + ")" : what),
        sample_(sample) {}

  long sample() const noexcept { return sample_; }

 private:
  long sample_;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vol
