#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "smflow/data_space.hpp"
#include "smflow/field.hpp"
#include "smflow/loss_models.hpp"
#include "smflow/rng.hpp"
#include "smflow/types.hpp"

namespace smflow {

// Ensemble of tracked points at time t of a flow with learning rate eta,
// discretized with step dt <= eta.
struct FlowState {
  Points positions;
  double t = 0.0;
  double eta = 0.0;
  double dt = 0.0;
};

// Default resolution: dt = eta / 50.
inline constexpr int kDefaultDtDivisor = 50;

// Throws PreconditionError unless 0 < dt <= eta and all positions are finite
// and of the given dimension.
void validate_flow_state(const FlowState& state, int dimension);

// x <- x + b(x) dt + sqrt(eta) sum_k sqrt(w_k) G(x, theta_k) dB_k, with b the
// modified drift and the same increment for every point.
FlowState smf_step(const LossModel& model, const FlowState& state, const CylindricalIncrement& inc,
                   DriftMode mode = DriftMode::kModified);

// x <- x + b(x) dt + sqrt(eta) Sigma(x)^{1/2} dW with one shared dW ~ N(0, dt I_d).
FlowState sme_step(const LossModel& model, const FlowState& state, const Vector& dW,
                   DriftMode mode = DriftMode::kModified);

// x <- x + [V - (eta/4) grad|V|^2 - (eta/4) <D|V|^2, L>] dt
//        + sqrt(eta) sum_k sqrt(w_k) G(L, x, theta_k) dB_k
// with L the empirical measure of the ensemble, frozen during the step.
FlowState ddsmf_step(const MeasureField& field, const FlowState& state, const CylindricalIncrement& inc,
                     DriftMode mode = DriftMode::kModified);

// Draws its own increments from the stream and applies one step.
using Stepper = std::function<FlowState(const FlowState&, RandomStream&)>;

Stepper make_smf_stepper(std::shared_ptr<const LossModel> model, DriftMode mode = DriftMode::kModified);
Stepper make_sme_stepper(std::shared_ptr<const LossModel> model, DriftMode mode = DriftMode::kModified);
Stepper make_ddsmf_stepper(std::shared_ptr<const MeasureField> field, DriftMode mode = DriftMode::kModified);

// Number of dt-steps covering [0, T].  Throws PreconditionError when T < 0 or
// T / dt is not within a couple of ulps of an integer.
std::int64_t steps_for_horizon(double T, double dt);

// Applies n_steps steps and returns the states at the checkpoint steps
// (ascending, within [0, n_steps]); with none, only the final state.
std::vector<FlowState> integrate_steps(const Stepper& stepper, const FlowState& initial, std::int64_t n_steps,
                                       RandomStream& rng, const std::vector<std::int64_t>& checkpoints = {});

// Integrates up to time initial.t + T.  Checkpoints are given as step counts.
std::vector<FlowState> integrate(const Stepper& stepper, const FlowState& initial, double T, RandomStream& rng,
                                 const std::vector<std::int64_t>& checkpoints = {});

}  // namespace smflow
