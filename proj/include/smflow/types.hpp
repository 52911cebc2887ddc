#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Positions of tracked points or particles, one column-vector per point.
using Points = std::vector<Vector>;

// Thrown when a caller violates an operation's precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a computation produces a non-finite value or a broken
// intermediate (e.g. a materially indefinite covariance).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string(what) + ": non-finite value");
}

// Selects whether flows carry the O(eta) drift correction.  kFirstOrder drops
// it, giving the flow that only matches SGD to first order.
enum class DriftMode { kModified, kFirstOrder };

}  // namespace smflow
