#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "smflow/integrators.hpp"
#include "smflow/meanfield_net.hpp"

using namespace smflow;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

std::shared_ptr<NetworkModel> tanh_net() {
  std::vector<Vector> atoms;
  atoms.push_back((Vector(2) << 1.0, -0.5).finished());
  atoms.push_back((Vector(2) << -0.3, 0.8).finished());
  atoms.push_back((Vector(2) << 0.6, 0.4).finished());
  const auto data = make_discrete_distribution(atoms, {0.5, 0.3, 0.2});
  return std::make_shared<NetworkModel>(std::make_shared<TanhFeature>(2), data,
                                        std::vector<Vector>{scalar(0.7), scalar(-0.4), scalar(0.2)});
}

Points network_ensemble() {
  return {(Vector(4) << 0.5, 0.1, -0.4, 0.2).finished(), (Vector(4) << -0.3, 0.7, 0.2, -0.1).finished(),
          (Vector(4) << 0.9, -0.6, 0.3, 0.05).finished()};
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double se_mean = 0.0;
};

Moments endpoint_moments(const Stepper& stepper, double x, double eta, double dt, double T, std::int64_t replicates,
                         std::uint64_t seed) {
  double s = 0.0, s2 = 0.0;
  for (std::int64_t r = 0; r < replicates; ++r) {
    RandomStream rng(seed, static_cast<std::uint64_t>(r), StreamTag::kNoise);
    const auto out = integrate(stepper, FlowState{{scalar(x)}, 0.0, eta, dt}, T, rng);
    const double v = out[0].positions[0][0];
    s += v;
    s2 += v * v;
  }
  Moments m;
  m.mean = s / replicates;
  m.var = s2 / replicates - m.mean * m.mean;
  m.se_mean = std::sqrt(m.var / replicates);
  return m;
}

}  // namespace

TEST_CASE("single-atom data gives a deterministic modified Euler step") {
  const auto one = make_discrete_distribution(std::vector<double>{0.7}, {1.0});
  const ShiftModel shift(one);
  const FlowState s{{scalar(2.0)}, 0.0, 0.1, 0.01};
  RandomStream rng(3, 0);
  const auto inc = draw_cylindrical_increment(one, 0.01, rng);
  const auto next = smf_step(shift, s, inc);
  CHECK(next.positions[0][0] == doctest::Approx(2.0 - (1.0 + 0.05) * (2.0 - 0.7) * 0.01).epsilon(1e-14));
  CHECK(next.t == doctest::Approx(0.01));
}

TEST_CASE("shift model: one-step increment variance is eta dt") {
  const ShiftModel shift;
  const double eta = 0.1, dt = eta / 50;
  const std::int64_t replicates = 100000;
  double s = 0.0, s2 = 0.0;
  const double drift = modified_drift(shift, eta, scalar(0.5))[0] * dt;
  for (std::int64_t r = 0; r < replicates; ++r) {
    RandomStream rng(4, static_cast<std::uint64_t>(r), StreamTag::kNoise);
    const auto next = smf_step(shift, FlowState{{scalar(0.5)}, 0.0, eta, dt},
                               draw_cylindrical_increment(shift.data(), dt, rng));
    const double n = next.positions[0][0] - 0.5 - drift;
    s += n;
    s2 += n * n;
  }
  const double second = s2 / replicates;
  const double expected = eta * dt;
  CHECK(std::abs(second - expected) < 5.0 * std::sqrt(2.0) * expected / std::sqrt(double(replicates)));
}

TEST_CASE("shift model: the difference of two points evolves deterministically") {
  const ShiftModel shift;
  const double eta = 0.1, dt = eta / 10;
  FlowState s{{scalar(1.0), scalar(-0.5)}, 0.0, eta, dt};
  RandomStream rng(5, 0);
  double gap = 1.5;
  for (int n = 0; n < 100; ++n) {
    s = smf_step(shift, s, draw_cylindrical_increment(shift.data(), dt, rng));
    gap *= 1.0 - (1.0 + 0.5 * eta) * dt;
    CHECK(s.positions[0][0] - s.positions[1][0] == doctest::Approx(gap).epsilon(1e-12));
  }
}

TEST_CASE("SME and SMF coincide on the shift model under matched noise") {
  const ShiftModel shift;
  const double eta = 0.1, dt = eta / 20;
  FlowState a{{scalar(1.0), scalar(0.2)}, 0.0, eta, dt};
  FlowState b = a;
  RandomStream rng(6, 0);
  for (int n = 0; n < 40; ++n) {
    const auto inc = draw_cylindrical_increment(shift.data(), dt, rng);
    // The shift-model noise field is m - theta and Sigma^{1/2} = 1.
    double dw = 0.0;
    for (std::size_t k = 0; k < shift.data().size(); ++k) {
      dw += shift.data().sqrt_weight(k) * noise_field(shift, scalar(0.0), k)[0] * inc.per_atom[k];
    }
    a = smf_step(shift, a, inc);
    b = sme_step(shift, b, scalar(dw));
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.positions[i][0] == doctest::Approx(b.positions[i][0]).epsilon(1e-14));
  }
}

TEST_CASE("zero Brownian increment gives the pure drift step") {
  const ScaleModel scale;
  const FlowState s{{scalar(0.8)}, 0.0, 0.1, 0.01};
  const auto next = sme_step(scale, s, scalar(0.0));
  CHECK(next.positions[0][0] == doctest::Approx(0.8 + modified_drift(scale, 0.1, scalar(0.8))[0] * 0.01));
}

TEST_CASE("noise covariance of SMF and SME at two points") {
  // Scale model with atoms {0, 2}: A~(x, y) = x y and Sigma^{1/2}(x) = |x|.
  const ScaleModel scale;
  const double eta = 0.1, dt = eta / 50;
  const Vector x = scalar(1.0), y = scalar(-1.0);
  const std::int64_t replicates = 100000;
  for (bool sme : {false, true}) {
    double s = 0.0, s2 = 0.0;
    const double bx = modified_drift(scale, eta, x)[0] * dt, by = modified_drift(scale, eta, y)[0] * dt;
    for (std::int64_t r = 0; r < replicates; ++r) {
      RandomStream rng(7, static_cast<std::uint64_t>(r), StreamTag::kNoise);
      const FlowState st{{x, y}, 0.0, eta, dt};
      const auto next = sme ? sme_step(scale, st, scalar(std::sqrt(dt) * rng.normal()))
                            : smf_step(scale, st, draw_cylindrical_increment(scale.data(), dt, rng));
      const double p = (next.positions[0][0] - x[0] - bx) * (next.positions[1][0] - y[0] - by);
      s += p;
      s2 += p * p;
    }
    const double mean = s / replicates;
    const double se = std::sqrt((s2 / replicates - mean * mean) / replicates);
    const double expected = sme ? eta * dt : -eta * dt;
    CHECK(std::abs(mean - expected) < 5.0 * se);
  }
}

TEST_CASE("SMF mean and variance on the shift model") {
  const auto shift = std::make_shared<ShiftModel>();
  const double eta = 0.1, dt = eta / 50;
  const auto m = endpoint_moments(make_smf_stepper(shift), 1.0, eta, dt, 1.0, 20000, 8);
  const double a = 1.0 + 0.5 * eta;
  // Euler-Maruyama on a linear drift has an exact mean and variance recursion.
  double em_mean = 1.0, em_var = 0.0;
  for (int n = 0; n < 500; ++n) {
    em_mean *= 1.0 - a * dt;
    em_var = (1.0 - a * dt) * (1.0 - a * dt) * em_var + eta * dt;
  }
  CHECK(std::abs(m.mean - std::exp(-1.05)) < 5.0 * m.se_mean + std::abs(em_mean - std::exp(-1.05)));
  CHECK(std::abs(m.mean - em_mean) < 5.0 * m.se_mean);
  const double ou_var = eta * (1.0 - std::exp(-2.1)) / 2.1;
  CHECK(ou_var == doctest::Approx(0.04179).epsilon(1e-4));
  const double se_var = std::sqrt(2.0 / 20000) * em_var;
  CHECK(std::abs(m.var - em_var) < 5.0 * se_var);
  CHECK(std::abs(em_var - ou_var) < 1e-3);
}

TEST_CASE("halving dt moves endpoint means by less than the Monte Carlo error") {
  const double eta = 0.1, T = 0.5;
  const std::shared_ptr<const LossModel> models[] = {std::make_shared<ShiftModel>(), std::make_shared<ScaleModel>()};
  for (const auto& model : models) {
    const auto stepper = make_smf_stepper(model);
    const auto coarse = endpoint_moments(stepper, 0.8, eta, eta / 50, T, 8000, 9);
    const auto fine = endpoint_moments(stepper, 0.8, eta, eta / 100, T, 8000, 10);
    CHECK(std::abs(coarse.mean - fine.mean) < 3.0 * std::hypot(coarse.se_mean, fine.se_mean));
  }
}

TEST_CASE("DDSMF on a loss field is the SMF step") {
  const auto scale = std::make_shared<ScaleModel>();
  const LossField field(scale);
  FlowState a{{scalar(1.0), scalar(-0.4), scalar(2.0)}, 0.0, 0.1, 0.01};
  FlowState b = a;
  RandomStream rng(11, 0);
  for (int n = 0; n < 30; ++n) {
    const auto inc = draw_cylindrical_increment(scale->data(), 0.01, rng);
    a = smf_step(*scale, a, inc);
    b = ddsmf_step(field, b, inc);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.positions[i][0] == b.positions[i][0]);
  }
}

TEST_CASE("single-particle DDSMF uses the delta measure") {
  const auto net = tanh_net();
  const NetworkField field(net);
  const Vector z = (Vector(4) << 0.3, 0.2, -0.5, 0.4).finished();
  const double eta = 0.1, dt = 0.01;
  RandomStream rng(12, 0);
  const auto inc = draw_cylindrical_increment(net->data(), dt, rng);
  const auto next = ddsmf_step(field, FlowState{{z}, 0.0, eta, dt}, inc);
  const EmpiricalMeasure delta(Points{z});
  Vector noise = Vector::Zero(4);
  for (std::size_t k = 0; k < 3; ++k) noise += net->data().sqrt_weight(k) * net->noise_G(delta, z, k) * inc.per_atom[k];
  const Vector drift = net->drift_V(delta, z) + net->gradient_correction(delta, z, eta) + net->lions_correction(delta, z, eta);
  CHECK((next.positions[0] - (z + drift * dt + std::sqrt(eta) * noise)).norm() < 1e-13);
}

TEST_CASE("DDSMF matches a term-by-term evaluation on the network") {
  const auto net = tanh_net();
  const NetworkField field(net);
  const double eta = 0.2, dt = 0.02;
  FlowState s{network_ensemble(), 0.0, eta, dt};
  RandomStream rng(13, 0);
  for (int step = 0; step < 3; ++step) {
    const auto inc = draw_cylindrical_increment(net->data(), dt, rng);
    const EmpiricalMeasure lambda(s.positions);
    Points expected;
    for (const auto& x : s.positions) {
      const Vector v = net->drift_V(lambda, x);
      Vector interaction = Vector::Zero(4);
      for (const auto& y : lambda.points()) interaction += net->mixed_K(x, y) * net->drift_V(lambda, y) / 3.0;
      const Vector drift = v - 0.5 * eta * net->drift_jacobian(lambda, x).transpose() * v + 0.5 * eta * interaction;
      Vector noise = Vector::Zero(4);
      for (std::size_t k = 0; k < 3; ++k) {
        noise += net->data().sqrt_weight(k) * net->noise_G(lambda, x, k) * inc.per_atom[k];
      }
      expected.push_back(x + drift * dt + std::sqrt(eta) * noise);
    }
    s = ddsmf_step(field, s, inc);
    for (std::size_t i = 0; i < 3; ++i) CHECK((s.positions[i] - expected[i]).norm() < 1e-13);
  }
}

TEST_CASE("DDSMF is exchangeable") {
  const auto net = tanh_net();
  const auto stepper = make_ddsmf_stepper(std::make_shared<NetworkField>(net));
  Points init = network_ensemble();
  init.push_back((Vector(4) << -0.2, -0.2, 0.6, 0.3).finished());
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Points permuted;
  for (auto p : perm) permuted.push_back(init[p]);
  RandomStream a(14, 0, StreamTag::kNoise), b(14, 0, StreamTag::kNoise);
  const auto out_a = integrate(stepper, FlowState{init, 0.0, 0.1, 0.01}, 0.5, a);
  const auto out_b = integrate(stepper, FlowState{permuted, 0.0, 0.1, 0.01}, 0.5, b);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK((out_b[0].positions[i] - out_a[0].positions[perm[i]]).norm() < 1e-13);
  }
}

TEST_CASE("endpoint gap shrinks with the initial perturbation") {
  const auto net = tanh_net();
  const auto stepper = make_ddsmf_stepper(std::make_shared<NetworkField>(net));
  const Points init = network_ensemble();
  RandomStream base_rng(15, 0, StreamTag::kNoise);
  const auto base = integrate(stepper, FlowState{init, 0.0, 0.1, 0.01}, 0.5, base_rng)[0];
  const Vector direction = (Vector(4) << 1.0, -1.0, 0.5, 0.5).finished().normalized();
  double previous = 1e300;
  for (double delta : {0.1, 0.05, 0.025}) {
    Points moved;
    for (const auto& x : init) moved.push_back(x + delta * direction);
    RandomStream rng(15, 0, StreamTag::kNoise);
    const auto end = integrate(stepper, FlowState{moved, 0.0, 0.1, 0.01}, 0.5, rng)[0];
    const double gap = wasserstein2(EmpiricalMeasure(base.positions), EmpiricalMeasure(end.positions));
    CHECK(gap < previous);
    CHECK(gap <= 5.0 * delta);
    previous = gap;
  }
}

TEST_CASE("horizon and state validation") {
  const auto shift = std::make_shared<ShiftModel>();
  const auto stepper = make_smf_stepper(shift);
  RandomStream rng(16, 0);
  const FlowState s{{scalar(0.4)}, 0.0, 0.1, 0.002};
  const auto zero = integrate(stepper, s, 0.0, rng);
  REQUIRE(zero.size() == 1);
  CHECK(zero[0].positions[0][0] == 0.4);
  CHECK(steps_for_horizon(1.0, 0.002) == 500);
  CHECK(steps_for_horizon(0.3, 0.1) == 3);
  CHECK_THROWS_AS(steps_for_horizon(1.0, 0.3), PreconditionError);
  CHECK_THROWS_AS(steps_for_horizon(-1.0, 0.1), PreconditionError);
  CHECK_THROWS_AS(integrate(stepper, s, 0.0031, rng), PreconditionError);
  const auto cps = integrate(stepper, s, 0.01, rng, {0, 5});
  REQUIRE(cps.size() == 2);
  CHECK(cps[1].t == doctest::Approx(0.01));
  const FlowState coarse{{scalar(0.4)}, 0.0, 0.1, 0.2};
  CHECK_THROWS_AS(smf_step(*shift, coarse, draw_cylindrical_increment(shift->data(), 0.2, rng)), PreconditionError);
  const FlowState ok{{scalar(0.4)}, 0.0, 0.1, 0.01};
  CHECK_THROWS_AS(smf_step(*shift, ok, draw_cylindrical_increment(shift->data(), 0.02, rng)), PreconditionError);
  CHECK_THROWS_AS(sme_step(*shift, ok, Vector::Zero(2)), PreconditionError);
  const FlowState empty{{}, 0.0, 0.1, 0.01};
  CHECK_THROWS_AS(validate_flow_state(empty, 1), PreconditionError);
}
