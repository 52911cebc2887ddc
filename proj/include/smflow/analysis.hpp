#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "smflow/field.hpp"
#include "smflow/loss_models.hpp"
#include "smflow/measures.hpp"
#include "smflow/meanfield_net.hpp"
#include "smflow/rng.hpp"
#include "smflow/types.hpp"

namespace smflow {

// Mean and variance of the SGD chain and of the flow for the shift model with
// data mean m and variance s2, started at x:
//   sgd:  m + (1-eta)^n (x-m),  eta s2 (1 - (1-eta)^{2n}) / (2 - eta)
//   flow: m + e^{-aT} (x-m),    eta s2 (1 - e^{-2aT}) / (2a)
// with n = T/eta and a = 1 + eta/2 (a = 1 in first-order mode).
struct LinearOracle {
  double sgd_mean = 0.0;
  double sgd_var = 0.0;
  double flow_mean = 0.0;
  double flow_var = 0.0;
};

LinearOracle closed_form_linear_oracle(double eta, double T, double x, DriftMode mode = DriftMode::kModified,
                                       double data_mean = 0.0, double data_variance = 1.0);

// |E Phi(flow at T) - E Phi(chain after T/eta steps)| per learning rate.
struct WeakErrorCurve {
  std::vector<double> etas;
  std::vector<double> errors;
  std::vector<double> standard_errors;
  std::vector<double> flow_values;
  std::vector<double> sgd_values;
  std::vector<double> flow_standard_errors;
  std::vector<double> sgd_standard_errors;
  std::vector<bool> noise_dominated;
  std::string method;
};

// Phi(mu) = offset + coefficient <x^power, mu> on scalar tracked points.
struct PolynomialObservable {
  double offset = 0.0;
  double coefficient = 1.0;
  int power = 1;  // 1 or 2
};

// Exact curve for the shift model (d = 1) from the linear oracle.  etas must be
// strictly decreasing and divide T.
WeakErrorCurve weak_error_curve_closed_form(const std::vector<double>& etas, double T,
                                            const std::vector<double>& initial_points,
                                            const PolynomialObservable& phi, DriftMode mode = DriftMode::kModified,
                                            double data_mean = 0.0, double data_variance = 1.0);

struct MonteCarloSettings {
  std::int64_t replicates = 10000;
  int dt_divisor = 50;
  std::uint64_t seed = 0;
  int workers = 1;
  double snr_floor = 2.0;
  DriftMode mode = DriftMode::kModified;
};

// Monte Carlo curve for any loss model: the flow is SMF on the tracked points,
// the chain is SGD with one shared atom per step.  A point is flagged
// noise-dominated when error < snr_floor * standard_error.
WeakErrorCurve weak_error_curve_monte_carlo(const LossModel& model, const CylindricalFunctional& phi,
                                            const std::vector<double>& etas, double T, const Points& initial_points,
                                            const MonteCarloSettings& settings);

struct OrderFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;  // 95% t-interval half-width of the slope
  std::size_t points = 0;
};

// Least-squares slope of log(error) against log(eta).  Throws
// PreconditionError with fewer than three points or non-positive entries.
OrderFit fit_order(const std::vector<double>& etas, const std::vector<double>& errors);

// Uses only the points that are not noise-dominated and have error > 0.
OrderFit fit_order(const WeakErrorCurve& curve);

enum class CovariationMethod { kSGD, kSMF, kSME };

std::string to_string(CovariationMethod method);

struct CovariationSettings {
  double eta = 0.1;
  int window = 1;  // flow steps of size dt
  int dt_divisor = 50;
  std::int64_t replicates = 100000;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Two-point statistics of the motions started at x and xbar.
//  SMF / SME: realized covariation of the martingale parts
//    sum_steps (dX(x) - b dt) (dX(xbar) - b dt)^T / elapsed, averaged over
//    replicates; expected eta A~(x, xbar) or eta Sigma^{1/2}(x) Sigma^{1/2}(xbar).
//  SGD: one-step covariance of Z_1(x), Z_1(xbar) about their exact conditional
//    means z - eta grad R(z); expected eta^2 A~(x, xbar).
// difference_rate is the same statistic for the difference process (trace),
// per unit time.
struct CovariationEstimate {
  Matrix estimate;
  Matrix standard_error;
  Matrix expected;
  double difference_rate = 0.0;
  double difference_se = 0.0;
  std::int64_t replicates = 0;
};

CovariationEstimate two_point_covariation(CovariationMethod method, const LossModel& model, const Vector& x,
                                          const Vector& xbar, const CovariationSettings& settings);

// One-step covariance of particles i and j of the interacting chain started
// from `positions`, about the exact conditional means z + eta V;
// expected eta^2 sum_k w_k G(i, k) G(j, k)^T.
CovariationEstimate interacting_one_step_covariance(const MeasureField& field, const Points& positions,
                                                    std::size_t i, std::size_t j, const CovariationSettings& settings);

// Pieces of the one-step expansion S Phi = Phi + eta L1 Phi + eta^2 (L2 + L1^2 / 2) Phi + O(eta^3).
// S Phi is the exact finite expectation over the data atoms.
struct GeneratorPieces {
  double phi = 0.0;
  double s_phi = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l1_squared = 0.0;
  double expansion = 0.0;
  double residual = 0.0;
};

GeneratorPieces one_step_generator_residual(const CylindricalFunctional& phi, const EmpiricalMeasure& mu,
                                            const MeasureField& field, double eta);
GeneratorPieces one_step_generator_residual(const CylindricalFunctional& phi, const EmpiricalMeasure& mu,
                                            const LossModel& model, double eta);

struct MeanfieldGapSettings {
  std::vector<int> m_values;
  int reference_size = 512;
  double eta = 0.05;
  double T = 0.5;
  int seeds = 20;
  int subsamples = 32;
  int reference_dt_divisor = 100;
  Vector initial_mean = Vector::Zero(1);
  double initial_std = 1.0;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Per M: W2 between the interacting chain on M particles after T/eta steps and
// a DDSMF reference ensemble of reference_size particles at T.  Each seed draws
// reference_size initial points; the chain uses the first M.  The reference is
// subsampled without replacement to M points `subsamples` times and the median
// W2 kept; the report is the median over seeds.
struct MeanfieldGapRow {
  int m = 0;
  double median_gap = 0.0;
  double mean_gap = 0.0;
  double median_initial_gap = 0.0;
  std::vector<double> per_seed;
};

std::vector<MeanfieldGapRow> meanfield_gap(const MeasureField& field, const MeanfieldGapSettings& settings);

// W2 between an ensemble and a larger one by the subsampling protocol: median
// over `subsamples` draws of `small.size()` atoms from `large` without
// replacement.  Equal sizes compare directly.
double subsampled_wasserstein2(const EmpiricalMeasure& small, const EmpiricalMeasure& large, int subsamples,
                               RandomStream& rng);

double median(std::vector<double> values);

}  // namespace smflow
