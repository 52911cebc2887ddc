#include "smflow/loss_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace smflow {

LossModel::LossModel(int dimension, DataDistribution data)
    : dimension_(dimension), data_(std::move(data)) {
  require(dimension_ > 0, "loss model dimension must be positive");
}

Vector LossModel::grad_risk(const Vector& z) const {
  Vector total = Vector::Zero(dimension_);
  for (std::size_t k = 0; k < data_.size(); ++k) total += data_.weight(k) * grad_pointwise(z, k);
  return total;
}

Vector LossModel::hessian_vec(const Vector& z, const Vector& v) const {
  const double norm = v.norm();
  if (norm == 0.0) return Vector::Zero(dimension_);
  const double h = 1e-5 * (1.0 + z.norm());
  const Vector direction = v / norm;
  const Vector plus = grad_risk(z + h * direction);
  const Vector minus = grad_risk(z - h * direction);
  return (plus - minus) * (norm / (2.0 * h));
}

Matrix LossModel::hessian(const Vector& z) const {
  Matrix h(dimension_, dimension_);
  for (int j = 0; j < dimension_; ++j) h.col(j) = hessian_vec(z, Vector::Unit(dimension_, j));
  return h;
}

// ---------------------------------------------------------------- shift

ShiftModel::ShiftModel(DataDistribution data) : LossModel(data.atom_dimension(), data) {}

ShiftModel::ShiftModel() : ShiftModel(make_discrete_distribution(std::vector<double>{-1.0, 1.0}, {1.0, 1.0})) {}

Vector ShiftModel::grad_pointwise(const Vector& z, std::size_t atom) const { return z - data().atom(atom); }

Vector ShiftModel::grad_risk(const Vector& z) const { return z - data().mean(); }

Vector ShiftModel::hessian_vec(const Vector&, const Vector& v) const { return v; }

// ---------------------------------------------------------------- scale

ScaleModel::ScaleModel(DataDistribution data, int dimension) : LossModel(dimension, std::move(data)) {
  require(this->data().atom_dimension() == 1, "scale model needs scalar atoms");
}

ScaleModel::ScaleModel() : ScaleModel(make_discrete_distribution(std::vector<double>{0.0, 2.0}, {1.0, 1.0})) {}

Vector ScaleModel::grad_pointwise(const Vector& z, std::size_t atom) const { return data().atom(atom)[0] * z; }

Vector ScaleModel::grad_risk(const Vector& z) const { return data().mean()[0] * z; }

Vector ScaleModel::hessian_vec(const Vector&, const Vector& v) const { return data().mean()[0] * v; }

// ---------------------------------------------------------------- polynomial

namespace {

int polynomial_dimension(const std::vector<std::vector<std::vector<double>>>& c) {
  require(!c.empty() && !c.front().empty(), "polynomial model needs a coefficient table");
  return static_cast<int>(c.front().size());
}

}  // namespace

PolynomialModel::PolynomialModel(DataDistribution data,
                                 std::vector<std::vector<std::vector<double>>> coefficients)
    : LossModel(polynomial_dimension(coefficients), std::move(data)), coefficients_(std::move(coefficients)) {
  require(coefficients_.size() == this->data().size(),
          "polynomial model: one coefficient table per data atom is required");
  for (const auto& per_atom : coefficients_) {
    require(static_cast<int>(per_atom.size()) == dimension(),
            "polynomial model: every atom needs coefficients for each coordinate");
    for (const auto& powers : per_atom) {
      require(!powers.empty() && powers.size() <= 5, "polynomial model: degree must be between 0 and 4");
      for (double c : powers) require(std::isfinite(c), "polynomial model: coefficients must be finite");
    }
  }
}

Vector PolynomialModel::grad_pointwise(const Vector& z, std::size_t atom) const {
  Vector g = Vector::Zero(dimension());
  const auto& table = coefficients_[atom];
  for (int i = 0; i < dimension(); ++i) {
    const auto& powers = table[static_cast<std::size_t>(i)];
    // Horner on the derivative sum_p p c_p z^(p-1).
    double acc = 0.0;
    for (std::size_t p = powers.size(); p-- > 1;) acc = acc * z[i] + static_cast<double>(p) * powers[p];
    g[i] = acc;
  }
  return g;
}

// ---------------------------------------------------------------- fields

Vector grad_pointwise_loss(const LossModel& model, const Vector& z, std::size_t atom) {
  require(z.size() == model.dimension(), "grad_pointwise_loss: dimension mismatch");
  require(atom < model.data().size(), "grad_pointwise_loss: atom index out of range");
  require(z.allFinite(), "grad_pointwise_loss: non-finite input");
  Vector g = model.grad_pointwise(z, atom);
  require_finite(g, "grad_pointwise_loss");
  return g;
}

Vector noise_field(const LossModel& model, const Vector& z, std::size_t atom) {
  require(z.allFinite(), "noise_field: non-finite input");
  Vector g = model.grad_pointwise(z, atom) - model.grad_risk(z);
  require_finite(g, "noise_field");
  return g;
}

Matrix covariance_kernel(const LossModel& model, const Vector& x, const Vector& y) {
  const int d = model.dimension();
  const Vector grad_x = model.grad_risk(x);
  const Vector grad_y = model.grad_risk(y);
  Matrix a = Matrix::Zero(d, d);
  const auto& data = model.data();
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Vector gx = model.grad_pointwise(x, k) - grad_x;
    const Vector gy = model.grad_pointwise(y, k) - grad_y;
    a.noalias() += data.weight(k) * gx * gy.transpose();
  }
  return a;
}

Matrix sqrt_psd(const Matrix& m) {
  require(m.rows() == m.cols(), "sqrt_psd: matrix must be square");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= kPsdClampTolerance,
          "sqrt_psd: matrix is not symmetric");
  if (m.rows() == 1) {
    const double v = m(0, 0);
    if (v < -kPsdClampTolerance) throw NumericalError("sqrt_psd: negative eigenvalue " + std::to_string(v));
    return Matrix::Constant(1, 1, std::sqrt(std::max(v, 0.0)));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw NumericalError("sqrt_psd: eigen decomposition failed");
  Vector values = solver.eigenvalues();
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < -kPsdClampTolerance) {
      throw NumericalError("sqrt_psd: negative eigenvalue " + std::to_string(values[i]));
    }
    values[i] = std::sqrt(std::max(values[i], 0.0));
  }
  const Matrix& vectors = solver.eigenvectors();
  return vectors * values.asDiagonal() * vectors.transpose();
}

Vector modified_drift(const LossModel& model, double eta, const Vector& z, DriftMode mode) {
  require(eta > 0.0, "modified_drift: eta must be positive");
  const Vector grad = model.grad_risk(z);
  Vector drift = -grad;
  if (mode == DriftMode::kModified) drift -= (0.5 * eta) * model.hessian_vec(z, grad);
  require_finite(drift, "modified_drift");
  return drift;
}

}  // namespace smflow
