#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "smflow/types.hpp"

namespace smflow {

// Equal-weight empirical measure (1/N) sum_i delta_{x_i}.
class EmpiricalMeasure {
 public:
  explicit EmpiricalMeasure(Points points);

  std::size_t size() const { return points_.size(); }
  int dimension() const { return static_cast<int>(points_.front().size()); }
  const Points& points() const { return points_; }
  const Vector& operator[](std::size_t i) const { return points_[i]; }

  double weight() const { return 1.0 / static_cast<double>(points_.size()); }

 private:
  Points points_;
};

inline constexpr std::size_t kMaxExactMatchingSize = 512;

// Minimum-cost perfect matching for a square cost matrix (Hungarian method
// with potentials, O(n^3)).  Returns assignment[row] = column.
std::vector<int> min_cost_assignment(const Matrix& cost);

// Exact W2 between two empirical measures with the same number of atoms:
// sorted pairing in d = 1, minimum-cost matching on squared distances
// otherwise.  Throws PreconditionError for unequal sizes or N > 512.
double wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

// The mean matched squared distance (W2^2) with the same rules.
double wasserstein2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

EmpiricalMeasure push_forward(const EmpiricalMeasure& m, const std::function<Vector(const Vector&)>& map);

// <|x|^p, m>.  Throws PreconditionError for p < 0.
double moment(const EmpiricalMeasure& m, double p);

// A test function on R^d with its gradient and Hessian.
struct InnerFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

// A function h on R^n with its gradient and Hessian.
struct OuterFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
};

// Phi(mu) = h(<phi_1, mu>, ..., <phi_n, mu>).  Its Lions derivatives are
//   D Phi(mu, x)          = sum_i d_i h(u) grad phi_i(x)
//   grad D Phi(mu, x)     = sum_i d_i h(u) Hess phi_i(x)
//   D^2 Phi(mu, x, y)     = sum_ij d_ij h(u) grad phi_i(x) grad phi_j(y)^T
// with u the vector of inner averages.
class CylindricalFunctional {
 public:
  CylindricalFunctional(std::vector<InnerFunction> inner, OuterFunction outer);

  std::size_t arity() const { return inner_.size(); }
  const std::vector<InnerFunction>& inner() const { return inner_; }
  const OuterFunction& outer() const { return outer_; }

  Vector inner_averages(const EmpiricalMeasure& m) const;

 private:
  std::vector<InnerFunction> inner_;
  OuterFunction outer_;
};

double eval_functional(const CylindricalFunctional& phi, const EmpiricalMeasure& m);

// D Phi(m, x).  Throws PreconditionError when a gradient callback is missing.
Vector lions_derivative(const CylindricalFunctional& phi, const EmpiricalMeasure& m, const Vector& x);

// grad_x D Phi(m, x), entry (a, b) = d/dx_b of D Phi(m, x)_a.
Matrix lions_gradient(const CylindricalFunctional& phi, const EmpiricalMeasure& m, const Vector& x);

// D^2 Phi(m, x, y), entry (a, b) pairs component a at x with component b at y.
Matrix lions_second_derivative(const CylindricalFunctional& phi, const EmpiricalMeasure& m, const Vector& x,
                               const Vector& y);

// Derivatives evaluated at every atom of m at once; avoids recomputing the
// inner averages.  lions_second[i * N + j] = D^2 Phi(m, x_i, x_j).
struct LionsDerivatives {
  double value = 0.0;
  std::vector<Vector> first;
  std::vector<Matrix> gradient;
  std::vector<Matrix> second;
};

LionsDerivatives lions_derivatives_on_atoms(const CylindricalFunctional& phi, const EmpiricalMeasure& m);

}  // namespace smflow
