#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "smflow/data_space.hpp"
#include "smflow/field.hpp"
#include "smflow/measures.hpp"
#include "smflow/types.hpp"

namespace smflow {

// A neuron Psi(z, theta) in R^k0 with parameters z in R^d.
class FeatureMap {
 public:
  virtual ~FeatureMap() = default;

  virtual std::string name() const = 0;
  virtual int parameter_dimension() const = 0;  // d
  virtual int output_dimension() const = 0;     // k0
  virtual int input_dimension() const = 0;      // n0, the dimension of theta

  virtual Vector value(const Vector& z, const Vector& theta) const = 0;
  // k0 x d, entry (c, a) = d Psi_c / d z_a.
  virtual Matrix jacobian(const Vector& z, const Vector& theta) const = 0;
  // d x d Hessian of component c.
  virtual Matrix hessian(const Vector& z, const Vector& theta, int component) const = 0;
};

// Psi(z, theta) = z . theta with k0 = 1.  Unbounded; meant for closed-form
// checks on bounded trajectories.
class LinearFeature final : public FeatureMap {
 public:
  explicit LinearFeature(int dimension = 1);

  std::string name() const override { return "linear"; }
  int parameter_dimension() const override { return dimension_; }
  int output_dimension() const override { return 1; }
  int input_dimension() const override { return dimension_; }

  Vector value(const Vector& z, const Vector& theta) const override;
  Matrix jacobian(const Vector& z, const Vector& theta) const override;
  Matrix hessian(const Vector& z, const Vector& theta, int component) const override;

 private:
  int dimension_;
};

// Psi(z, theta) = c tanh(U . theta + b) with z = (c, U, b) in R^k0 x R^n0 x R.
class TanhFeature final : public FeatureMap {
 public:
  TanhFeature(int input_dimension, int output_dimension = 1);

  std::string name() const override { return "tanh"; }
  int parameter_dimension() const override { return k0_ + n0_ + 1; }
  int output_dimension() const override { return k0_; }
  int input_dimension() const override { return n0_; }

  Vector value(const Vector& z, const Vector& theta) const override;
  Matrix jacobian(const Vector& z, const Vector& theta) const override;
  Matrix hessian(const Vector& z, const Vector& theta, int component) const override;

 private:
  int n0_;
  int k0_;
};

// Shallow mean-field network f^M(z, theta) = (1/M) sum_i Psi(z^i, theta)
// trained on labels f(theta_k) with the square loss.
class NetworkModel {
 public:
  NetworkModel(std::shared_ptr<const FeatureMap> feature, DataDistribution data, std::vector<Vector> labels);

  const FeatureMap& feature() const { return *feature_; }
  const DataDistribution& data() const { return data_; }
  const std::vector<Vector>& labels() const { return labels_; }
  int dimension() const { return feature_->parameter_dimension(); }

  // C_f = E|f(theta)|^2 / 2; enters the risk only.
  double label_energy() const;

  // F(z) = E[f(theta) . Psi(z, theta)] and its gradient.
  double kernel_F(const Vector& z) const;
  Vector grad_F(const Vector& z) const;

  // K(z, y) = E[Psi(z, theta) . Psi(y, theta)], grad_z K(z, y) and the mixed
  // derivative, entry (a, b) = d^2 K / dz_a dy_b.
  double kernel_K(const Vector& z, const Vector& y) const;
  Vector grad_K(const Vector& z, const Vector& y) const;
  Matrix mixed_K(const Vector& z, const Vector& y) const;

  // <Psi(., theta_k), nu>
  Vector response(const EmpiricalMeasure& nu, std::size_t atom) const;

  // Risk of the particle configuration nu (as f^M with M = |nu|).
  double risk(const EmpiricalMeasure& nu) const;

  // V(nu, z) = grad F(z) - <grad_z K(z, .), nu>
  Vector drift_V(const EmpiricalMeasure& nu, const Vector& z) const;

  // G(nu, z, theta_k) = (f(theta_k) - <Psi(., theta_k), nu>) . grad Psi(z, theta_k) - E[...]
  Vector noise_G(const EmpiricalMeasure& nu, const Vector& z, std::size_t atom) const;

  // grad_z V(nu, z), entry (a, b) = dV_a / dz_b.
  Matrix drift_jacobian(const EmpiricalMeasure& nu, const Vector& z) const;

  // -(eta/4) <D|V(nu, .)|^2(z), nu> = +(eta/2) int grad_y grad_z K(z, y) V(nu, y) nu(dy).
  Vector lions_correction(const EmpiricalMeasure& nu, const Vector& z, double eta) const;

  // -(eta/4) grad_z |V(nu, z)|^2 = -(eta/2) (grad_z V)^T V.
  Vector gradient_correction(const EmpiricalMeasure& nu, const Vector& z, double eta) const;

 private:
  std::shared_ptr<const FeatureMap> feature_;
  DataDistribution data_;
  std::vector<Vector> labels_;
};

// The network coefficients as a MeasureField.  Freezing precomputes per-atom
// summaries of the measure, so each evaluation costs O(K) feature calls
// instead of O(K M).
class NetworkField final : public MeasureField {
 public:
  explicit NetworkField(std::shared_ptr<const NetworkModel> net) : net_(std::move(net)) {}

  int dimension() const override { return net_->dimension(); }
  const DataDistribution& data() const override { return net_->data(); }
  std::unique_ptr<FrozenField> freeze(const EmpiricalMeasure& measure) const override;

  const NetworkModel& network() const { return *net_; }

 private:
  std::shared_ptr<const NetworkModel> net_;
};

}  // namespace smflow
