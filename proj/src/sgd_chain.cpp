#include "smflow/sgd_chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smflow/measures.hpp"

namespace smflow {

namespace {

void check_state(const ChainState& state, int dimension) {
  require(state.eta > 0.0 && std::isfinite(state.eta), "SGD chain: eta must be positive");
  require(!state.positions.empty(), "SGD chain: no tracked points");
  for (const auto& z : state.positions) {
    require(z.size() == dimension, "SGD chain: position dimension does not match the model");
  }
}

void check_checkpoints(const std::vector<std::int64_t>& checkpoints, std::int64_t n_steps) {
  require(n_steps >= 0, "run_chain: n_steps must be nonnegative");
  require(std::is_sorted(checkpoints.begin(), checkpoints.end()), "run_chain: checkpoints must be ascending");
  for (auto c : checkpoints) require(c >= 0 && c <= n_steps, "run_chain: checkpoint outside [0, n_steps]");
}

template <class Step>
std::vector<ChainState> run(const DataDistribution& data, const ChainState& initial, std::int64_t n_steps,
                            RandomStream& rng, const std::vector<std::int64_t>& checkpoints, Step&& step) {
  check_checkpoints(checkpoints, n_steps);
  std::vector<ChainState> out;
  auto next = checkpoints.begin();
  ChainState state = initial;
  for (std::int64_t n = 0;; ++n) {
    while (next != checkpoints.end() && *next == n) {
      out.push_back(state);
      ++next;
    }
    if (n == n_steps) break;
    state = step(state, sample_datum(data, rng));
  }
  if (checkpoints.empty()) out.push_back(std::move(state));
  return out;
}

}  // namespace

ChainState sgd_step(const LossModel& model, const ChainState& state, std::size_t atom) {
  check_state(state, model.dimension());
  ChainState next{{}, state.step + 1, state.eta};
  next.positions.reserve(state.positions.size());
  for (const auto& z : state.positions) {
    Vector moved = z - state.eta * grad_pointwise_loss(model, z, atom);
    require_finite(moved, "sgd_step");
    next.positions.push_back(std::move(moved));
  }
  return next;
}

ChainState interacting_sgd_step(const MeasureField& field, const ChainState& state, std::size_t atom) {
  check_state(state, field.dimension());
  require(atom < field.data().size(), "interacting_sgd_step: atom index out of range");
  const EmpiricalMeasure gamma(state.positions);
  const auto frozen = field.freeze(gamma);
  ChainState next{{}, state.step + 1, state.eta};
  next.positions.reserve(state.positions.size());
  for (const auto& z : state.positions) {
    Vector moved = z + state.eta * frozen->chain_direction(z, atom);
    require_finite(moved, "interacting_sgd_step");
    next.positions.push_back(std::move(moved));
  }
  return next;
}

std::vector<ChainState> run_chain(const LossModel& model, const ChainState& initial, std::int64_t n_steps,
                                  RandomStream& rng, const std::vector<std::int64_t>& checkpoints) {
  check_state(initial, model.dimension());
  return run(model.data(), initial, n_steps, rng, checkpoints,
             [&](const ChainState& s, std::size_t atom) { return sgd_step(model, s, atom); });
}

std::vector<ChainState> run_chain(const MeasureField& field, const ChainState& initial, std::int64_t n_steps,
                                  RandomStream& rng, const std::vector<std::int64_t>& checkpoints) {
  check_state(initial, field.dimension());
  return run(field.data(), initial, n_steps, rng, checkpoints,
             [&](const ChainState& s, std::size_t atom) { return interacting_sgd_step(field, s, atom); });
}

}  // namespace smflow
