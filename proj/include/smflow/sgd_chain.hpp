#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "smflow/field.hpp"
#include "smflow/loss_models.hpp"
#include "smflow/rng.hpp"
#include "smflow/types.hpp"

namespace smflow {

// Positions of all tracked points (or particles) after `step` SGD steps.
struct ChainState {
  Points positions;
  std::int64_t step = 0;
  double eta = 0.0;
};

// z <- z - eta grad R~(z, theta_atom) for every tracked point, all driven by
// the same atom.
ChainState sgd_step(const LossModel& model, const ChainState& state, std::size_t atom);

// z^i <- z^i + eta V(Gamma, z^i) + eta G(Gamma, z^i, theta_atom) with Gamma the
// empirical measure of the current positions, frozen for the whole step.
ChainState interacting_sgd_step(const MeasureField& field, const ChainState& state, std::size_t atom);

// Runs n_steps steps, drawing one atom per step from rng.  Returns the states
// at the requested checkpoint steps (each in [0, n_steps], ascending); with no
// checkpoints only the final state is returned.
std::vector<ChainState> run_chain(const LossModel& model, const ChainState& initial, std::int64_t n_steps,
                                  RandomStream& rng, const std::vector<std::int64_t>& checkpoints = {});
std::vector<ChainState> run_chain(const MeasureField& field, const ChainState& initial, std::int64_t n_steps,
                                  RandomStream& rng, const std::vector<std::int64_t>& checkpoints = {});

}  // namespace smflow
