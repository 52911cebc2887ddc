#pragma once

#include <cstddef>
#include <memory>

#include "smflow/data_space.hpp"
#include "smflow/loss_models.hpp"
#include "smflow/measures.hpp"
#include "smflow/types.hpp"

namespace smflow {

// Coefficients (V, G) of a measure-dependent chain
//   z <- z + eta V(nu, z) + eta G(nu, z, theta)
// evaluated at one frozen measure nu.  Holds references to nu and the data
// distribution, which must outlive it.
class FrozenField {
 public:
  FrozenField(const EmpiricalMeasure& measure, const DataDistribution& data) : measure_(&measure), data_(&data) {}
  virtual ~FrozenField() = default;

  const EmpiricalMeasure& measure() const { return *measure_; }
  const DataDistribution& data() const { return *data_; }

  // V(nu, z)
  virtual Vector drift(const Vector& z) const = 0;

  // G(nu, z, theta_k); centered under the data weights.
  virtual Vector noise(const Vector& z, std::size_t atom) const = 0;

  // grad_z V(nu, z), entry (a, b) = dV_a / dz_b.
  virtual Matrix drift_jacobian(const Vector& z) const = 0;

  // Lions derivative of nu -> V(nu, z) at y, entry (a, b) = D_b V_a.
  virtual Matrix drift_lions(const Vector& z, const Vector& y) const = 0;

  // V - (eta/4) grad|V|^2 - (eta/4) <D|V|^2, nu>, i.e.
  // V(z) - (eta/2) J(z)^T V(z) - (eta/2) int DV(z, y) V(y) nu(dy).
  // First-order mode returns V.
  virtual Vector flow_drift(const Vector& z, double eta, DriftMode mode) const;

  // V + G(., theta_k), the chain increment per unit learning rate.
  virtual Vector chain_direction(const Vector& z, std::size_t atom) const;

  // sum_k sqrt(w_k) G(z, theta_k) dB_k
  virtual Vector noise_increment(const Vector& z, const CylindricalIncrement& inc) const;

 private:
  const EmpiricalMeasure* measure_;
  const DataDistribution* data_;
};

class MeasureField {
 public:
  virtual ~MeasureField() = default;

  virtual int dimension() const = 0;
  virtual const DataDistribution& data() const = 0;
  virtual std::unique_ptr<FrozenField> freeze(const EmpiricalMeasure& measure) const = 0;
};

// Measure-independent field of a loss model: V = -grad R and
// G = -(grad R~ - grad R), so the chain is plain SGD.  The flow drift and the
// noise integral are those of smf_step (whose integrand has the opposite sign,
// which leaves the law unchanged), so DDSMF steps on this field reproduce SMF
// steps bit for bit.
class LossField final : public MeasureField {
 public:
  explicit LossField(std::shared_ptr<const LossModel> model) : model_(std::move(model)) {}

  int dimension() const override { return model_->dimension(); }
  const DataDistribution& data() const override { return model_->data(); }
  std::unique_ptr<FrozenField> freeze(const EmpiricalMeasure& measure) const override;

  const LossModel& model() const { return *model_; }

 private:
  std::shared_ptr<const LossModel> model_;
};

}  // namespace smflow
