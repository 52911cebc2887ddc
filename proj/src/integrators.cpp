#include "smflow/integrators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "smflow/measures.hpp"

namespace smflow {

void validate_flow_state(const FlowState& state, int dimension) {
  require(std::isfinite(state.eta) && state.eta > 0.0, "flow state: eta must be positive");
  require(std::isfinite(state.dt) && state.dt > 0.0, "flow state: dt must be positive");
  require(state.dt <= state.eta * (1.0 + 1e-12), "flow state: dt must not exceed eta");
  require(!state.positions.empty(), "flow state: no tracked points");
  for (const auto& x : state.positions) {
    require(x.size() == dimension, "flow state: position dimension does not match the model");
    require(x.allFinite(), "flow state: positions must be finite");
  }
}

namespace {

void check_increment(const FlowState& state, const CylindricalIncrement& inc, const DataDistribution& data) {
  require(inc.dt == state.dt, "flow step: increment dt differs from the state dt");
  require(inc.per_atom.size() == data.size(), "flow step: increment has the wrong number of atoms");
}

FlowState advance(const FlowState& state) {
  FlowState next{{}, state.t + state.dt, state.eta, state.dt};
  next.positions.reserve(state.positions.size());
  return next;
}

}  // namespace

FlowState smf_step(const LossModel& model, const FlowState& state, const CylindricalIncrement& inc,
                   DriftMode mode) {
  validate_flow_state(state, model.dimension());
  check_increment(state, inc, model.data());
  const double scale = std::sqrt(state.eta);
  FlowState next = advance(state);
  for (const auto& x : state.positions) {
    const Vector noise =
        integrate_cylindrical(model.data(), inc, [&](std::size_t k) { return noise_field(model, x, k); });
    Vector moved = x + modified_drift(model, state.eta, x, mode) * state.dt + scale * noise;
    require_finite(moved, "smf_step");
    next.positions.push_back(std::move(moved));
  }
  return next;
}

FlowState sme_step(const LossModel& model, const FlowState& state, const Vector& dW, DriftMode mode) {
  validate_flow_state(state, model.dimension());
  require(dW.size() == model.dimension(), "sme_step: Brownian increment has the wrong dimension");
  const double scale = std::sqrt(state.eta);
  FlowState next = advance(state);
  for (const auto& x : state.positions) {
    const Matrix root = sqrt_psd(covariance_kernel(model, x, x));
    Vector moved = x + modified_drift(model, state.eta, x, mode) * state.dt + scale * (root * dW);
    require_finite(moved, "sme_step");
    next.positions.push_back(std::move(moved));
  }
  return next;
}

FlowState ddsmf_step(const MeasureField& field, const FlowState& state, const CylindricalIncrement& inc,
                     DriftMode mode) {
  validate_flow_state(state, field.dimension());
  check_increment(state, inc, field.data());
  const EmpiricalMeasure lambda(state.positions);
  const auto frozen = field.freeze(lambda);
  const double scale = std::sqrt(state.eta);
  FlowState next = advance(state);
  for (const auto& x : state.positions) {
    const Vector noise = frozen->noise_increment(x, inc);
    Vector moved = x + frozen->flow_drift(x, state.eta, mode) * state.dt + scale * noise;
    require_finite(moved, "ddsmf_step");
    next.positions.push_back(std::move(moved));
  }
  return next;
}

Stepper make_smf_stepper(std::shared_ptr<const LossModel> model, DriftMode mode) {
  require(model != nullptr, "smf stepper: model missing");
  return [model, mode](const FlowState& s, RandomStream& rng) {
    return smf_step(*model, s, draw_cylindrical_increment(model->data(), s.dt, rng), mode);
  };
}

Stepper make_sme_stepper(std::shared_ptr<const LossModel> model, DriftMode mode) {
  require(model != nullptr, "sme stepper: model missing");
  return [model, mode](const FlowState& s, RandomStream& rng) {
    Vector dW(model->dimension());
    const double scale = std::sqrt(s.dt);
    for (Eigen::Index i = 0; i < dW.size(); ++i) dW[i] = scale * rng.normal();
    return sme_step(*model, s, dW, mode);
  };
}

Stepper make_ddsmf_stepper(std::shared_ptr<const MeasureField> field, DriftMode mode) {
  require(field != nullptr, "ddsmf stepper: field missing");
  return [field, mode](const FlowState& s, RandomStream& rng) {
    return ddsmf_step(*field, s, draw_cylindrical_increment(field->data(), s.dt, rng), mode);
  };
}

std::int64_t steps_for_horizon(double T, double dt) {
  require(std::isfinite(T) && T >= 0.0, "integrate: horizon must be nonnegative");
  require(std::isfinite(dt) && dt > 0.0, "integrate: dt must be positive");
  const double ratio = T / dt;
  const double n = std::round(ratio);
  require(std::abs(ratio - n) <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, ratio),
          "integrate: dt does not divide the horizon");
  return static_cast<std::int64_t>(n);
}

std::vector<FlowState> integrate_steps(const Stepper& stepper, const FlowState& initial, std::int64_t n_steps,
                                       RandomStream& rng, const std::vector<std::int64_t>& checkpoints) {
  require(n_steps >= 0, "integrate: step count must be nonnegative");
  require(std::is_sorted(checkpoints.begin(), checkpoints.end()), "integrate: checkpoints must be ascending");
  for (auto c : checkpoints) require(c >= 0 && c <= n_steps, "integrate: checkpoint outside the horizon");
  std::vector<FlowState> out;
  auto next = checkpoints.begin();
  FlowState state = initial;
  for (std::int64_t n = 0;; ++n) {
    while (next != checkpoints.end() && *next == n) {
      out.push_back(state);
      ++next;
    }
    if (n == n_steps) break;
    state = stepper(state, rng);
    state.t = initial.t + static_cast<double>(n + 1) * initial.dt;
  }
  if (checkpoints.empty()) out.push_back(std::move(state));
  return out;
}

std::vector<FlowState> integrate(const Stepper& stepper, const FlowState& initial, double T, RandomStream& rng,
                                 const std::vector<std::int64_t>& checkpoints) {
  return integrate_steps(stepper, initial, steps_for_horizon(T, initial.dt), rng, checkpoints);
}

}  // namespace smflow
