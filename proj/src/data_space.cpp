#include "smflow/data_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace smflow {

DataDistribution make_discrete_distribution(std::vector<Vector> atoms, std::vector<double> weights) {
  require(!atoms.empty(), "data distribution needs at least one atom");
  require(atoms.size() == weights.size(),
          "data distribution: " + std::to_string(atoms.size()) + " atoms but " +
              std::to_string(weights.size()) + " weights");
  const auto dim = atoms.front().size();
  require(dim > 0, "data atoms must have positive dimension");
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    require(atoms[k].size() == dim, "data atom " + std::to_string(k) + " has the wrong dimension");
    require(atoms[k].allFinite(), "data atom " + std::to_string(k) + " is not finite");
    require(std::isfinite(weights[k]) && weights[k] > 0.0,
            "data weight " + std::to_string(k) + " must be positive and finite");
  }

  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  DataDistribution dist;
  dist.atoms_ = std::move(atoms);
  dist.weights_.reserve(weights.size());
  for (double w : weights) dist.weights_.push_back(w / total);

  dist.sqrt_weights_.reserve(dist.weights_.size());
  dist.cumulative_.reserve(dist.weights_.size());
  double running = 0.0;
  for (double w : dist.weights_) {
    dist.sqrt_weights_.push_back(std::sqrt(w));
    running += w;
    dist.cumulative_.push_back(running);
  }
  dist.cumulative_.back() = 1.0;
  return dist;
}

DataDistribution make_discrete_distribution(const std::vector<double>& atoms,
                                            std::vector<double> weights) {
  std::vector<Vector> vecs;
  vecs.reserve(atoms.size());
  for (double a : atoms) vecs.push_back(Vector::Constant(1, a));
  return make_discrete_distribution(std::move(vecs), std::move(weights));
}

Vector DataDistribution::mean() const {
  Vector m = Vector::Zero(atom_dimension());
  for (std::size_t k = 0; k < size(); ++k) m += weights_[k] * atoms_[k];
  return m;
}

double DataDistribution::total_variance() const {
  const Vector m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < size(); ++k) v += weights_[k] * (atoms_[k] - m).squaredNorm();
  return v;
}

std::size_t sample_datum(const DataDistribution& dist, RandomStream& rng) {
  if (dist.size() == 1) {
    rng.uniform();  // keep stream consumption independent of K
    return 0;
  }
  const double u = rng.uniform();
  const auto it = std::upper_bound(dist.cumulative_.begin(), dist.cumulative_.end(), u);
  const auto index = static_cast<std::size_t>(it - dist.cumulative_.begin());
  return std::min(index, dist.size() - 1);
}

CylindricalIncrement draw_cylindrical_increment(const DataDistribution& dist, double dt,
                                                RandomStream& rng) {
  require(std::isfinite(dt) && dt > 0.0, "cylindrical increment needs dt > 0");
  CylindricalIncrement inc;
  inc.dt = dt;
  inc.per_atom.resize(dist.size());
  const double scale = std::sqrt(dt);
  for (double& b : inc.per_atom) b = scale * rng.normal();
  return inc;
}

}  // namespace smflow
