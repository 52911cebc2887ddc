#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "smflow/data_space.hpp"
#include "smflow/types.hpp"

namespace smflow {

// Pointwise loss R~(z, theta) over a finite data distribution, together with
// the risk R = E_w R~ and its derivatives.  Implementations must be immutable.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::string name() const = 0;

  int dimension() const { return dimension_; }
  const DataDistribution& data() const { return data_; }

  // grad_z R~(z, theta_k)
  virtual Vector grad_pointwise(const Vector& z, std::size_t atom) const = 0;

  // grad R(z); defaults to the weighted sum of grad_pointwise.
  virtual Vector grad_risk(const Vector& z) const;

  // Hessian of R applied to v.  The default is a central difference of
  // grad_risk with step 1e-5 * (1 + |z|) along v / |v|.
  virtual Vector hessian_vec(const Vector& z, const Vector& v) const;

  // Full Hessian of R assembled from hessian_vec on the unit vectors.
  Matrix hessian(const Vector& z) const;

 protected:
  LossModel(int dimension, DataDistribution data);

 private:
  int dimension_;
  DataDistribution data_;
};

// R~(z, theta) = |z - theta|^2 / 2.  Atoms must live in R^d.
class ShiftModel final : public LossModel {
 public:
  explicit ShiftModel(DataDistribution data);
  // Theta = {-1, +1} with equal weights, d = 1.
  ShiftModel();

  std::string name() const override { return "shift"; }
  Vector grad_pointwise(const Vector& z, std::size_t atom) const override;
  Vector grad_risk(const Vector& z) const override;
  Vector hessian_vec(const Vector& z, const Vector& v) const override;
};

// R~(z, theta) = theta |z|^2 / 2 with scalar atoms.  Then
// A~(x, y) = Var(theta) x y^T, which is sign-indefinite off the diagonal.
class ScaleModel final : public LossModel {
 public:
  ScaleModel(DataDistribution data, int dimension = 1);
  // Theta = {0, 2} with equal weights, d = 1.
  ScaleModel();

  std::string name() const override { return "scale"; }
  Vector grad_pointwise(const Vector& z, std::size_t atom) const override;
  Vector grad_risk(const Vector& z) const override;
  Vector hessian_vec(const Vector& z, const Vector& v) const override;
};

// Separable polynomial loss R~(z, theta_k) = sum_i sum_p c[k][i][p] z_i^p with
// degree p <= 4.  The Hessian uses the finite-difference default.
class PolynomialModel final : public LossModel {
 public:
  // coefficients[k][i] holds the (up to five) powers 0..4 for coordinate i
  // under atom k.
  PolynomialModel(DataDistribution data, std::vector<std::vector<std::vector<double>>> coefficients);

  std::string name() const override { return "polynomial"; }
  Vector grad_pointwise(const Vector& z, std::size_t atom) const override;

 private:
  std::vector<std::vector<std::vector<double>>> coefficients_;
};

// grad R~(z, theta_k) with input validation.
Vector grad_pointwise_loss(const LossModel& model, const Vector& z, std::size_t atom);

// G(z, theta_k) = grad R~(z, theta_k) - grad R(z); centered under the data weights.
Vector noise_field(const LossModel& model, const Vector& z, std::size_t atom);

// A~(x, y) = sum_k w_k G(x, theta_k) G(y, theta_k)^T.  Sigma(x) = A~(x, x).
Matrix covariance_kernel(const LossModel& model, const Vector& x, const Vector& y);

// Symmetric square root of a symmetric PSD matrix.  Eigenvalues in
// [-1e-10, 0) are clamped to zero; anything more negative throws
// NumericalError.  Asymmetry above 1e-10 throws PreconditionError.
Matrix sqrt_psd(const Matrix& m);

inline constexpr double kPsdClampTolerance = 1e-10;

// -grad R(z) - (eta / 2) Hess R(z) grad R(z), i.e. -grad(R + eta/4 |grad R|^2).
// In first-order mode the correction is dropped.
Vector modified_drift(const LossModel& model, double eta, const Vector& z,
                      DriftMode mode = DriftMode::kModified);

}  // namespace smflow
