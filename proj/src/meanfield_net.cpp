#include "smflow/meanfield_net.hpp"

#include <cmath>

namespace smflow {

LinearFeature::LinearFeature(int dimension) : dimension_(dimension) {
  require(dimension >= 1, "linear feature: dimension must be positive");
}

Vector LinearFeature::value(const Vector& z, const Vector& theta) const {
  return Vector::Constant(1, z.dot(theta));
}

Matrix LinearFeature::jacobian(const Vector&, const Vector& theta) const { return theta.transpose(); }

Matrix LinearFeature::hessian(const Vector&, const Vector&, int) const {
  return Matrix::Zero(dimension_, dimension_);
}

TanhFeature::TanhFeature(int input_dimension, int output_dimension)
    : n0_(input_dimension), k0_(output_dimension) {
  require(n0_ >= 1 && k0_ >= 1, "tanh feature: dimensions must be positive");
}

Vector TanhFeature::value(const Vector& z, const Vector& theta) const {
  const double s = z.segment(k0_, n0_).dot(theta) + z[k0_ + n0_];
  return z.head(k0_) * std::tanh(s);
}

Matrix TanhFeature::jacobian(const Vector& z, const Vector& theta) const {
  const double s = z.segment(k0_, n0_).dot(theta) + z[k0_ + n0_];
  const double t = std::tanh(s);
  const double dt = 1.0 - t * t;
  Matrix jac = Matrix::Zero(k0_, parameter_dimension());
  for (int c = 0; c < k0_; ++c) {
    jac(c, c) = t;
    jac.block(c, k0_, 1, n0_) = z[c] * dt * theta.transpose();
    jac(c, k0_ + n0_) = z[c] * dt;
  }
  return jac;
}

Matrix TanhFeature::hessian(const Vector& z, const Vector& theta, int component) const {
  const double s = z.segment(k0_, n0_).dot(theta) + z[k0_ + n0_];
  const double t = std::tanh(s);
  const double dt = 1.0 - t * t;
  const double ddt = -2.0 * t * dt;
  const int d = parameter_dimension();
  // ds/dz restricted to (U, b).
  Vector ds = Vector::Zero(d);
  ds.segment(k0_, n0_) = theta;
  ds[k0_ + n0_] = 1.0;
  Matrix h = z[component] * ddt * ds * ds.transpose();
  h.row(component) += dt * ds.transpose();
  h.col(component) += dt * ds;
  return h;
}

NetworkModel::NetworkModel(std::shared_ptr<const FeatureMap> feature, DataDistribution data,
                           std::vector<Vector> labels)
    : feature_(std::move(feature)), data_(std::move(data)), labels_(std::move(labels)) {
  require(feature_ != nullptr, "network model: feature map missing");
  require(labels_.size() == data_.size(), "network model: one label per data atom required");
  require(data_.atom_dimension() == feature_->input_dimension(),
          "network model: data atoms do not match the feature input dimension");
  for (const auto& f : labels_) {
    require(f.size() == feature_->output_dimension(), "network model: label dimension must equal k0");
    require(f.allFinite(), "network model: labels must be finite");
  }
}

double NetworkModel::label_energy() const {
  double total = 0.0;
  for (std::size_t k = 0; k < data_.size(); ++k) total += data_.weight(k) * labels_[k].squaredNorm();
  return 0.5 * total;
}

double NetworkModel::kernel_F(const Vector& z) const {
  double total = 0.0;
  for (std::size_t k = 0; k < data_.size(); ++k) {
    total += data_.weight(k) * labels_[k].dot(feature_->value(z, data_.atom(k)));
  }
  return total;
}

Vector NetworkModel::grad_F(const Vector& z) const {
  Vector g = Vector::Zero(dimension());
  for (std::size_t k = 0; k < data_.size(); ++k) {
    g += data_.weight(k) * feature_->jacobian(z, data_.atom(k)).transpose() * labels_[k];
  }
  return g;
}

double NetworkModel::kernel_K(const Vector& z, const Vector& y) const {
  double total = 0.0;
  for (std::size_t k = 0; k < data_.size(); ++k) {
    total += data_.weight(k) * feature_->value(z, data_.atom(k)).dot(feature_->value(y, data_.atom(k)));
  }
  return total;
}

Vector NetworkModel::grad_K(const Vector& z, const Vector& y) const {
  Vector g = Vector::Zero(dimension());
  for (std::size_t k = 0; k < data_.size(); ++k) {
    g += data_.weight(k) * feature_->jacobian(z, data_.atom(k)).transpose() * feature_->value(y, data_.atom(k));
  }
  return g;
}

Matrix NetworkModel::mixed_K(const Vector& z, const Vector& y) const {
  Matrix m = Matrix::Zero(dimension(), dimension());
  for (std::size_t k = 0; k < data_.size(); ++k) {
    m += data_.weight(k) * feature_->jacobian(z, data_.atom(k)).transpose() * feature_->jacobian(y, data_.atom(k));
  }
  return m;
}

Vector NetworkModel::response(const EmpiricalMeasure& nu, std::size_t atom) const {
  Vector total = Vector::Zero(feature_->output_dimension());
  for (const auto& y : nu.points()) total += feature_->value(y, data_.atom(atom));
  return total * nu.weight();
}

double NetworkModel::risk(const EmpiricalMeasure& nu) const {
  double total = 0.0;
  for (std::size_t k = 0; k < data_.size(); ++k) {
    total += data_.weight(k) * (labels_[k] - response(nu, k)).squaredNorm();
  }
  return 0.5 * total;
}

Vector NetworkModel::drift_V(const EmpiricalMeasure& nu, const Vector& z) const {
  Vector mean_grad = Vector::Zero(dimension());
  for (const auto& y : nu.points()) mean_grad += grad_K(z, y);
  return grad_F(z) - nu.weight() * mean_grad;
}

Vector NetworkModel::noise_G(const EmpiricalMeasure& nu, const Vector& z, std::size_t atom) const {
  require(atom < data_.size(), "noise_G: atom index out of range");
  const Vector term = feature_->jacobian(z, data_.atom(atom)).transpose() * (labels_[atom] - response(nu, atom));
  return term - drift_V(nu, z);
}

Matrix NetworkModel::drift_jacobian(const EmpiricalMeasure& nu, const Vector& z) const {
  Matrix jac = Matrix::Zero(dimension(), dimension());
  for (std::size_t k = 0; k < data_.size(); ++k) {
    const Vector residual = labels_[k] - response(nu, k);
    for (int c = 0; c < feature_->output_dimension(); ++c) {
      jac += data_.weight(k) * residual[c] * feature_->hessian(z, data_.atom(k), c);
    }
  }
  return jac;
}

Vector NetworkModel::lions_correction(const EmpiricalMeasure& nu, const Vector& z, double eta) const {
  Vector total = Vector::Zero(dimension());
  for (const auto& y : nu.points()) total += mixed_K(z, y) * drift_V(nu, y);
  return (0.5 * eta * nu.weight()) * total;
}

Vector NetworkModel::gradient_correction(const EmpiricalMeasure& nu, const Vector& z, double eta) const {
  return -(0.5 * eta) * (drift_jacobian(nu, z).transpose() * drift_V(nu, z));
}

namespace {

class FrozenNetworkField final : public FrozenField {
 public:
  FrozenNetworkField(const EmpiricalMeasure& measure, const NetworkModel& net)
      : FrozenField(measure, net.data()), net_(net) {
    const auto& data = net.data();
    const auto k0 = net.feature().output_dimension();
    residual_.assign(data.size(), Vector::Zero(k0));
    for (const auto& y : measure.points()) {
      for (std::size_t k = 0; k < data.size(); ++k) residual_[k] -= net.feature().value(y, data.atom(k));
    }
    for (std::size_t k = 0; k < data.size(); ++k) residual_[k] = net.labels()[k] + residual_[k] * measure.weight();

    // transported_[k] = <J_k(y) V(y), nu(dy)>
    transported_.assign(data.size(), Vector::Zero(k0));
    std::vector<Matrix> jacobians(data.size());
    for (const auto& y : measure.points()) {
      Vector v = Vector::Zero(net.dimension());
      for (std::size_t k = 0; k < data.size(); ++k) {
        jacobians[k] = net.feature().jacobian(y, data.atom(k));
        v += data.weight(k) * jacobians[k].transpose() * residual_[k];
      }
      for (std::size_t k = 0; k < data.size(); ++k) transported_[k] += jacobians[k] * v;
    }
    for (auto& q : transported_) q *= measure.weight();
  }

  Vector drift(const Vector& z) const override {
    Vector v = Vector::Zero(z.size());
    for (std::size_t k = 0; k < residual_.size(); ++k) v += data().weight(k) * direction(z, k);
    return v;
  }

  Vector noise(const Vector& z, std::size_t atom) const override {
    require(atom < residual_.size(), "network noise: atom index out of range");
    return direction(z, atom) - drift(z);
  }

  Matrix drift_jacobian(const Vector& z) const override {
    Matrix jac = Matrix::Zero(z.size(), z.size());
    for (std::size_t k = 0; k < residual_.size(); ++k) {
      for (int c = 0; c < residual_[k].size(); ++c) {
        jac += data().weight(k) * residual_[k][c] * net_.feature().hessian(z, data().atom(k), c);
      }
    }
    return jac;
  }

  Matrix drift_lions(const Vector& z, const Vector& y) const override { return -net_.mixed_K(z, y); }

  Vector flow_drift(const Vector& z, double eta, DriftMode mode) const override {
    std::vector<Matrix> jacobians;
    jacobians.reserve(residual_.size());
    Vector v = Vector::Zero(z.size());
    for (std::size_t k = 0; k < residual_.size(); ++k) {
      jacobians.push_back(net_.feature().jacobian(z, data().atom(k)));
      v += data().weight(k) * jacobians.back().transpose() * residual_[k];
    }
    if (mode == DriftMode::kFirstOrder) return v;
    Vector lions = Vector::Zero(z.size());
    for (std::size_t k = 0; k < residual_.size(); ++k) {
      lions += data().weight(k) * jacobians[k].transpose() * transported_[k];
    }
    Vector out = v - (0.5 * eta) * (drift_jacobian(z).transpose() * v) + (0.5 * eta) * lions;
    require_finite(out, "network flow_drift");
    return out;
  }

  Vector chain_direction(const Vector& z, std::size_t atom) const override {
    require(atom < residual_.size(), "network chain: atom index out of range");
    return direction(z, atom);
  }

  Vector noise_increment(const Vector& z, const CylindricalIncrement& inc) const override {
    Vector v = Vector::Zero(z.size());
    Vector weighted = Vector::Zero(z.size());
    double db_total = 0.0;
    for (std::size_t k = 0; k < residual_.size(); ++k) {
      const Vector dir = direction(z, k);
      v += data().weight(k) * dir;
      const double db = data().sqrt_weight(k) * inc.per_atom[k];
      weighted += db * dir;
      db_total += db;
    }
    return weighted - db_total * v;
  }

 private:
  // J_k(z)^T (f(theta_k) - <Psi(., theta_k), nu>)
  Vector direction(const Vector& z, std::size_t k) const {
    return net_.feature().jacobian(z, data().atom(k)).transpose() * residual_[k];
  }

  const NetworkModel& net_;
  std::vector<Vector> residual_;
  std::vector<Vector> transported_;
};

}  // namespace

std::unique_ptr<FrozenField> NetworkField::freeze(const EmpiricalMeasure& measure) const {
  require(measure.dimension() == net_->dimension(), "network field: measure dimension mismatch");
  return std::make_unique<FrozenNetworkField>(measure, *net_);
}

}  // namespace smflow
