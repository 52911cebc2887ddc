#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "smflow/rng.hpp"
#include "smflow/types.hpp"

namespace smflow {

// A finite training-data distribution: K atoms theta_k with probabilities w_k.
// Immutable after construction and safe to share between threads.
class DataDistribution {
 public:
  std::size_t size() const { return atoms_.size(); }
  int atom_dimension() const { return static_cast<int>(atoms_.front().size()); }

  const Vector& atom(std::size_t k) const { return atoms_[k]; }
  double weight(std::size_t k) const { return weights_[k]; }
  double sqrt_weight(std::size_t k) const { return sqrt_weights_[k]; }

  const std::vector<Vector>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }

  // E_w[theta] and the (scalar) trace of Cov_w[theta].
  Vector mean() const;
  double total_variance() const;

 private:
  friend DataDistribution make_discrete_distribution(std::vector<Vector> atoms,
                                                     std::vector<double> weights);
  DataDistribution() = default;

  std::vector<Vector> atoms_;
  std::vector<double> weights_;
  std::vector<double> sqrt_weights_;
  std::vector<double> cumulative_;  // inclusive prefix sums, last entry == 1

  friend std::size_t sample_datum(const DataDistribution& dist, RandomStream& rng);
};

// Validates and normalizes: weights are rescaled to sum to one.
// Throws PreconditionError on empty input, mismatched lengths, non-positive or
// non-finite weights, atoms of differing dimension.
DataDistribution make_discrete_distribution(std::vector<Vector> atoms, std::vector<double> weights);

// Convenience overload for scalar atoms.
DataDistribution make_discrete_distribution(const std::vector<double>& atoms,
                                            std::vector<double> weights);

// Draws an atom index with probability w_k (one uniform per call).
std::size_t sample_datum(const DataDistribution& dist, RandomStream& rng);

// One Brownian increment per data atom.  The cylindrical Wiener process on
// L^2(theta) is expanded in the indicator basis e_k = 1_{theta_k} / sqrt(w_k),
// so that int g dW over one step is sum_k sqrt(w_k) g(theta_k) dB_k.
struct CylindricalIncrement {
  std::vector<double> per_atom;
  double dt = 0.0;
};

// K independent N(0, dt) draws.  Throws PreconditionError if dt <= 0.
CylindricalIncrement draw_cylindrical_increment(const DataDistribution& dist, double dt,
                                                RandomStream& rng);

// The discretized stochastic integral sum_k sqrt(w_k) g_k dB_k for an
// integrand given by its values on the atoms.
template <class Integrand>
Vector integrate_cylindrical(const DataDistribution& dist, const CylindricalIncrement& inc,
                             Integrand&& g) {
  Vector total;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    Vector term = g(k) * (dist.sqrt_weight(k) * inc.per_atom[k]);
    if (k == 0) {
      total = std::move(term);
    } else {
      total += term;
    }
  }
  return total;
}

}  // namespace smflow
