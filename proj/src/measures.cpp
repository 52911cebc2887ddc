#include "smflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace smflow {

EmpiricalMeasure::EmpiricalMeasure(Points points) : points_(std::move(points)) {
  require(!points_.empty(), "empirical measure needs at least one atom");
  const auto dim = points_.front().size();
  require(dim > 0, "empirical measure atoms must have positive dimension");
  for (const auto& p : points_) {
    require(p.size() == dim, "empirical measure atoms must share one dimension");
    require(p.allFinite(), "empirical measure atoms must be finite");
  }
}

std::vector<int> min_cost_assignment(const Matrix& cost) {
  require(cost.rows() == cost.cols(), "min_cost_assignment: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based arrays; column 0 is the virtual start column.
  std::vector<double> row_potential(n + 1, 0.0), col_potential(n + 1, 0.0);
  std::vector<int> col_owner(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);

  for (int row = 1; row <= n; ++row) {
    col_owner[0] = row;
    int col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const int row0 = col_owner[col0];
      double delta = kInf;
      int col1 = 0;
      for (int col = 1; col <= n; ++col) {
        if (used[col]) continue;
        const double reduced = cost(row0 - 1, col - 1) - row_potential[row0] - col_potential[col];
        if (reduced < min_slack[col]) {
          min_slack[col] = reduced;
          way[col] = col0;
        }
        if (min_slack[col] < delta) {
          delta = min_slack[col];
          col1 = col;
        }
      }
      for (int col = 0; col <= n; ++col) {
        if (used[col]) {
          row_potential[col_owner[col]] += delta;
          col_potential[col] -= delta;
        } else {
          min_slack[col] -= delta;
        }
      }
      col0 = col1;
    } while (col_owner[col0] != 0);
    do {
      const int col1 = way[col0];
      col_owner[col0] = col_owner[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<int> assignment(n, -1);
  for (int col = 1; col <= n; ++col) assignment[col_owner[col] - 1] = col - 1;
  return assignment;
}

double wasserstein2_squared(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  require(a.size() == b.size(), "wasserstein2: measures must have equal atom counts (got " +
                                    std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                                    "); subsample the larger one first");
  require(a.size() <= kMaxExactMatchingSize,
          "wasserstein2: exact matching is limited to 512 atoms; use the subsampling protocol");
  require(a.dimension() == b.dimension(), "wasserstein2: dimension mismatch");
  const std::size_t n = a.size();

  double total = 0.0;
  if (a.dimension() == 1) {
    // Monotone matching; the total is accumulated in the index order of a.
    std::vector<std::size_t> ia(n), ib(n), partner(n);
    std::iota(ia.begin(), ia.end(), std::size_t{0});
    std::iota(ib.begin(), ib.end(), std::size_t{0});
    std::sort(ia.begin(), ia.end(), [&](std::size_t i, std::size_t j) { return a[i][0] < a[j][0]; });
    std::sort(ib.begin(), ib.end(), [&](std::size_t i, std::size_t j) { return b[i][0] < b[j][0]; });
    for (std::size_t r = 0; r < n; ++r) partner[ia[r]] = ib[r];
    for (std::size_t i = 0; i < n; ++i) total += (a[i] - b[partner[i]]).squaredNorm();
  } else {
    Matrix cost(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) cost(i, j) = (a[i] - b[j]).squaredNorm();
    }
    const auto assignment = min_cost_assignment(cost);
    for (std::size_t i = 0; i < n; ++i) total += cost(i, assignment[i]);
  }
  return total / static_cast<double>(n);
}

double wasserstein2(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  return std::sqrt(wasserstein2_squared(a, b));
}

EmpiricalMeasure push_forward(const EmpiricalMeasure& m, const std::function<Vector(const Vector&)>& map) {
  Points image;
  image.reserve(m.size());
  for (const auto& p : m.points()) {
    Vector q = map(p);
    require_finite(q, "push_forward");
    image.push_back(std::move(q));
  }
  return EmpiricalMeasure(std::move(image));
}

double moment(const EmpiricalMeasure& m, double p) {
  require(p >= 0.0, "moment: p must be nonnegative");
  double total = 0.0;
  for (const auto& x : m.points()) total += std::pow(x.norm(), p);
  return total * m.weight();
}

CylindricalFunctional::CylindricalFunctional(std::vector<InnerFunction> inner, OuterFunction outer)
    : inner_(std::move(inner)), outer_(std::move(outer)) {
  require(static_cast<bool>(outer_.value), "cylindrical functional needs an outer value callback");
  for (const auto& f : inner_) require(static_cast<bool>(f.value), "inner functions need a value callback");
}

Vector CylindricalFunctional::inner_averages(const EmpiricalMeasure& m) const {
  Vector u = Vector::Zero(static_cast<Eigen::Index>(inner_.size()));
  for (std::size_t i = 0; i < inner_.size(); ++i) {
    double sum = 0.0;
    for (const auto& x : m.points()) sum += inner_[i].value(x);
    u[static_cast<Eigen::Index>(i)] = sum * m.weight();
  }
  return u;
}

double eval_functional(const CylindricalFunctional& phi, const EmpiricalMeasure& m) {
  return phi.outer().value(phi.inner_averages(m));
}

namespace {

void require_first_order(const CylindricalFunctional& phi) {
  require(static_cast<bool>(phi.outer().gradient), "lions_derivative: outer gradient callback missing");
  for (const auto& f : phi.inner()) {
    require(static_cast<bool>(f.gradient), "lions_derivative: inner gradient callback missing");
  }
}

void require_second_order(const CylindricalFunctional& phi) {
  require_first_order(phi);
  require(static_cast<bool>(phi.outer().hessian), "lions second derivative: outer Hessian callback missing");
  for (const auto& f : phi.inner()) {
    require(static_cast<bool>(f.hessian), "lions second derivative: inner Hessian callback missing");
  }
}

Vector first_at(const CylindricalFunctional& phi, const Vector& dh, const Vector& x) {
  Vector out = Vector::Zero(x.size());
  for (std::size_t i = 0; i < phi.arity(); ++i) out += dh[static_cast<Eigen::Index>(i)] * phi.inner()[i].gradient(x);
  return out;
}

Matrix gradient_at(const CylindricalFunctional& phi, const Vector& dh, const Vector& x) {
  Matrix out = Matrix::Zero(x.size(), x.size());
  for (std::size_t i = 0; i < phi.arity(); ++i) out += dh[static_cast<Eigen::Index>(i)] * phi.inner()[i].hessian(x);
  return out;
}

// Rows of the n x d matrix are grad phi_i(x)^T.
Matrix inner_jacobian(const CylindricalFunctional& phi, const Vector& x) {
  Matrix jac(static_cast<Eigen::Index>(phi.arity()), x.size());
  for (std::size_t i = 0; i < phi.arity(); ++i) jac.row(static_cast<Eigen::Index>(i)) = phi.inner()[i].gradient(x).transpose();
  return jac;
}

}  // namespace

Vector lions_derivative(const CylindricalFunctional& phi, const EmpiricalMeasure& m, const Vector& x) {
  require_first_order(phi);
  return first_at(phi, phi.outer().gradient(phi.inner_averages(m)), x);
}

Matrix lions_gradient(const CylindricalFunctional& phi, const EmpiricalMeasure& m, const Vector& x) {
  require_second_order(phi);
  return gradient_at(phi, phi.outer().gradient(phi.inner_averages(m)), x);
}

Matrix lions_second_derivative(const CylindricalFunctional& phi, const EmpiricalMeasure& m, const Vector& x,
                               const Vector& y) {
  require_second_order(phi);
  const Matrix h2 = phi.outer().hessian(phi.inner_averages(m));
  return inner_jacobian(phi, x).transpose() * h2 * inner_jacobian(phi, y);
}

LionsDerivatives lions_derivatives_on_atoms(const CylindricalFunctional& phi, const EmpiricalMeasure& m) {
  require_second_order(phi);
  const Vector u = phi.inner_averages(m);
  const Vector dh = phi.outer().gradient(u);
  const Matrix h2 = phi.outer().hessian(u);
  const std::size_t n = m.size();

  LionsDerivatives out;
  out.value = phi.outer().value(u);
  out.first.reserve(n);
  out.gradient.reserve(n);
  std::vector<Matrix> jacobians;
  jacobians.reserve(n);
  for (const auto& x : m.points()) {
    out.first.push_back(first_at(phi, dh, x));
    out.gradient.push_back(gradient_at(phi, dh, x));
    jacobians.push_back(inner_jacobian(phi, x));
  }
  out.second.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix left = jacobians[i].transpose() * h2;
    for (std::size_t j = 0; j < n; ++j) out.second.push_back(left * jacobians[j]);
  }
  return out;
}

}  // namespace smflow
