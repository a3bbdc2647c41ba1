#pragma once

#include <stdexcept>
#include <string>

namespace reinsqp {

/// Malformed or inconsistent input (scenario files, shapes, indices).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The dense representation would exceed the configured coordinate cap.
class DimensionTooLarge : public InputError {
 public:
  using InputError::InputError;
};

/// The constraint set of the requested problem is empty.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pivot matrix of the block elimination is numerically singular at the
/// requested shift. `level` is the elimination level n of D_n(n).
class SingularPivot : public NumericalError {
 public:
  SingularPivot(int level, double condition)
      : NumericalError("singular pivot at level " + std::to_string(level) +
                       " (condition " + std::to_string(condition) + ")"),
        level_(level),
        condition_(condition) {}

  int level() const { return level_; }
  double condition() const { return condition_; }

 private:
  int level_;
  double condition_;
};

class NotSpd : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class MaxPivotsExceeded : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace reinsqp
