#include "smflow/field.hpp"

namespace smflow {

Vector FrozenField::flow_drift(const Vector& z, double eta, DriftMode mode) const {
  Vector v = drift(z);
  if (mode == DriftMode::kFirstOrder) return v;
  Vector lions = Vector::Zero(z.size());
  for (const auto& y : measure_->points()) lions += drift_lions(z, y) * drift(y);
  lions *= measure_->weight();
  Vector out = v - (0.5 * eta) * (drift_jacobian(z).transpose() * v) - (0.5 * eta) * lions;
  require_finite(out, "flow_drift");
  return out;
}

Vector FrozenField::chain_direction(const Vector& z, std::size_t atom) const { return drift(z) + noise(z, atom); }

Vector FrozenField::noise_increment(const Vector& z, const CylindricalIncrement& inc) const {
  return integrate_cylindrical(*data_, inc, [&](std::size_t k) { return noise(z, k); });
}

namespace {

class FrozenLossField final : public FrozenField {
 public:
  FrozenLossField(const EmpiricalMeasure& measure, const LossModel& model)
      : FrozenField(measure, model.data()), model_(model) {}

  Vector drift(const Vector& z) const override { return -model_.grad_risk(z); }

  Vector noise(const Vector& z, std::size_t atom) const override { return -noise_field(model_, z, atom); }

  Matrix drift_jacobian(const Vector& z) const override { return -model_.hessian(z); }

  Matrix drift_lions(const Vector& z, const Vector&) const override { return Matrix::Zero(z.size(), z.size()); }

  Vector flow_drift(const Vector& z, double eta, DriftMode mode) const override {
    return modified_drift(model_, eta, z, mode);
  }

  Vector chain_direction(const Vector& z, std::size_t atom) const override {
    return -grad_pointwise_loss(model_, z, atom);
  }

  Vector noise_increment(const Vector& z, const CylindricalIncrement& inc) const override {
    return integrate_cylindrical(model_.data(), inc, [&](std::size_t k) { return noise_field(model_, z, k); });
  }

 private:
  const LossModel& model_;
};

}  // namespace

std::unique_ptr<FrozenField> LossField::freeze(const EmpiricalMeasure& measure) const {
  return std::make_unique<FrozenLossField>(measure, *model_);
}

}  // namespace smflow
