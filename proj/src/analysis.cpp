#include "smflow/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "smflow/integrators.hpp"
#include "smflow/parallel.hpp"
#include "smflow/sgd_chain.hpp"

namespace smflow {

namespace {

// Non-owning handle for APIs that take shared ownership.
template <class T>
std::shared_ptr<const T> borrow(const T& object) {
  return std::shared_ptr<const T>(std::shared_ptr<const T>(), &object);
}

std::uint64_t cell_id(std::size_t outer, std::int64_t inner) {
  return (static_cast<std::uint64_t>(outer) << 32) + static_cast<std::uint64_t>(inner);
}

void require_decreasing_etas(const std::vector<double>& etas) {
  require(!etas.empty(), "weak error curve: empty learning-rate sweep");
  for (std::size_t i = 0; i < etas.size(); ++i) {
    require(std::isfinite(etas[i]) && etas[i] > 0.0, "weak error curve: learning rates must be positive");
    if (i > 0) require(etas[i] < etas[i - 1], "weak error curve: learning rates must be strictly decreasing");
  }
}

struct MeanAndError {
  double mean = 0.0;
  double variance = 0.0;  // sample variance
};

MeanAndError summarize(const std::vector<double>& values) {
  MeanAndError out;
  const double n = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= n;
  if (values.size() > 1) {
    for (double v : values) out.variance += (v - out.mean) * (v - out.mean);
    out.variance /= n - 1.0;
  }
  return out;
}

// Cross-covariance of paired increments about their exact conditional means,
// with entrywise standard errors from the spread of the products.
void centered_covariance(const std::vector<Vector>& a, const Vector& mean_a, const std::vector<Vector>& b,
                         const Vector& mean_b, Matrix& estimate, Matrix& standard_error) {
  const std::size_t n = a.size();
  const double dn = static_cast<double>(n);
  Matrix sum = Matrix::Zero(mean_a.size(), mean_b.size());
  Matrix sum_sq = Matrix::Zero(mean_a.size(), mean_b.size());
  for (std::size_t r = 0; r < n; ++r) {
    const Matrix p = (a[r] - mean_a) * (b[r] - mean_b).transpose();
    sum += p;
    sum_sq += p.cwiseProduct(p);
  }
  estimate = sum / dn;
  const Matrix var_p = ((sum_sq / dn) - estimate.cwiseProduct(estimate)) * (dn / (dn - 1.0));
  standard_error = (var_p.cwiseMax(0.0) / dn).cwiseSqrt();
}

}  // namespace

double median(std::vector<double> values) {
  require(!values.empty(), "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

LinearOracle closed_form_linear_oracle(double eta, double T, double x, DriftMode mode, double data_mean,
                                       double data_variance) {
  require(std::isfinite(eta) && eta > 0.0, "linear oracle: eta must be positive");
  require(data_variance >= 0.0, "linear oracle: data variance must be nonnegative");
  const auto n = steps_for_horizon(T, eta);
  const double shift = x - data_mean;
  const double contraction = std::pow(1.0 - eta, static_cast<double>(n));
  const double rate = mode == DriftMode::kModified ? 1.0 + 0.5 * eta : 1.0;
  LinearOracle out;
  out.sgd_mean = data_mean + contraction * shift;
  out.sgd_var = eta * data_variance * (1.0 - contraction * contraction) / (2.0 - eta);
  out.flow_mean = data_mean + std::exp(-rate * T) * shift;
  out.flow_var = eta * data_variance * (1.0 - std::exp(-2.0 * rate * T)) / (2.0 * rate);
  return out;
}

WeakErrorCurve weak_error_curve_closed_form(const std::vector<double>& etas, double T,
                                            const std::vector<double>& initial_points,
                                            const PolynomialObservable& phi, DriftMode mode, double data_mean,
                                            double data_variance) {
  require_decreasing_etas(etas);
  require(!initial_points.empty(), "weak error curve: no initial points");
  require(phi.power == 1 || phi.power == 2, "closed-form weak error supports powers 1 and 2 only");
  WeakErrorCurve curve;
  curve.method = "closed-form";
  for (double eta : etas) {
    double flow = 0.0;
    double sgd = 0.0;
    for (double x : initial_points) {
      const auto o = closed_form_linear_oracle(eta, T, x, mode, data_mean, data_variance);
      if (phi.power == 1) {
        flow += o.flow_mean;
        sgd += o.sgd_mean;
      } else {
        flow += o.flow_var + o.flow_mean * o.flow_mean;
        sgd += o.sgd_var + o.sgd_mean * o.sgd_mean;
      }
    }
    const double m = static_cast<double>(initial_points.size());
    flow = phi.offset + phi.coefficient * flow / m;
    sgd = phi.offset + phi.coefficient * sgd / m;
    curve.etas.push_back(eta);
    curve.flow_values.push_back(flow);
    curve.sgd_values.push_back(sgd);
    curve.errors.push_back(std::abs(flow - sgd));
    curve.standard_errors.push_back(0.0);
    curve.flow_standard_errors.push_back(0.0);
    curve.sgd_standard_errors.push_back(0.0);
    curve.noise_dominated.push_back(false);
  }
  return curve;
}

WeakErrorCurve weak_error_curve_monte_carlo(const LossModel& model, const CylindricalFunctional& phi,
                                            const std::vector<double>& etas, double T, const Points& initial_points,
                                            const MonteCarloSettings& settings) {
  require_decreasing_etas(etas);
  require(settings.replicates >= 2, "weak error curve: at least two replicates required");
  require(settings.dt_divisor >= 1, "weak error curve: dt divisor must be positive");
  const auto stepper = make_smf_stepper(borrow(model), settings.mode);
  WeakErrorCurve curve;
  curve.method = "monte-carlo";
  const auto n = static_cast<std::size_t>(settings.replicates);
  for (std::size_t e = 0; e < etas.size(); ++e) {
    const double eta = etas[e];
    const auto n_sgd = steps_for_horizon(T, eta);
    const double dt = eta / settings.dt_divisor;
    std::vector<double> flow_values(n), sgd_values(n);
    parallel_for(n, settings.workers, [&](std::size_t r) {
      const auto id = cell_id(e, static_cast<std::int64_t>(r));
      RandomStream data_rng(settings.seed, id, StreamTag::kData);
      const auto chain = run_chain(model, ChainState{initial_points, 0, eta}, n_sgd, data_rng);
      sgd_values[r] = eval_functional(phi, EmpiricalMeasure(chain.back().positions));
      RandomStream noise_rng(settings.seed, id, StreamTag::kNoise);
      const auto flow = integrate_steps(stepper, FlowState{initial_points, 0.0, eta, dt},
                                        n_sgd * settings.dt_divisor, noise_rng);
      flow_values[r] = eval_functional(phi, EmpiricalMeasure(flow.back().positions));
    });
    const auto f = summarize(flow_values);
    const auto s = summarize(sgd_values);
    const double se = std::sqrt((f.variance + s.variance) / static_cast<double>(n));
    const double error = std::abs(f.mean - s.mean);
    curve.etas.push_back(eta);
    curve.flow_values.push_back(f.mean);
    curve.sgd_values.push_back(s.mean);
    curve.errors.push_back(error);
    curve.standard_errors.push_back(se);
    curve.flow_standard_errors.push_back(std::sqrt(f.variance / static_cast<double>(n)));
    curve.sgd_standard_errors.push_back(std::sqrt(s.variance / static_cast<double>(n)));
    curve.noise_dominated.push_back(error < settings.snr_floor * se);
  }
  return curve;
}

OrderFit fit_order(const std::vector<double>& etas, const std::vector<double>& errors) {
  require(etas.size() == errors.size(), "fit_order: etas and errors differ in length");
  require(etas.size() >= 3, "fit_order: at least three usable points are required");
  const std::size_t n = etas.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(etas[i] > 0.0 && errors[i] > 0.0, "fit_order: etas and errors must be positive");
    lx[i] = std::log(etas[i]);
    ly[i] = std::log(errors[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  require(sxx > 0.0, "fit_order: learning rates must not all coincide");
  OrderFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ssr += r * r;
  }
  const double dof = static_cast<double>(n - 2);
  const boost::math::students_t dist(dof);
  fit.half_width = boost::math::quantile(dist, 0.975) * std::sqrt(ssr / dof / sxx);
  return fit;
}

OrderFit fit_order(const WeakErrorCurve& curve) {
  std::vector<double> etas, errors;
  for (std::size_t i = 0; i < curve.etas.size(); ++i) {
    if (curve.noise_dominated[i] || !(curve.errors[i] > 0.0)) continue;
    etas.push_back(curve.etas[i]);
    errors.push_back(curve.errors[i]);
  }
  require(etas.size() >= 3, "fit_order: fewer than three points are above the noise floor; refusing to fit");
  return fit_order(etas, errors);
}

std::string to_string(CovariationMethod method) {
  switch (method) {
    case CovariationMethod::kSGD:
      return "sgd";
    case CovariationMethod::kSMF:
      return "smf";
    case CovariationMethod::kSME:
      return "sme";
  }
  return "unknown";
}

CovariationEstimate two_point_covariation(CovariationMethod method, const LossModel& model, const Vector& x,
                                          const Vector& xbar, const CovariationSettings& settings) {
  require(settings.replicates >= 2, "two_point_covariation: at least two replicates required");
  require(settings.window >= 1, "two_point_covariation: window must be at least one step");
  require(settings.eta > 0.0, "two_point_covariation: eta must be positive");
  require(x.size() == model.dimension() && xbar.size() == model.dimension(),
          "two_point_covariation: probe points have the wrong dimension");
  const auto n = static_cast<std::size_t>(settings.replicates);
  const double eta = settings.eta;
  const double sqrt_eta = std::sqrt(eta);
  CovariationEstimate out;
  out.replicates = settings.replicates;

  if (method == CovariationMethod::kSGD) {
    std::vector<Vector> a(n), b(n);
    parallel_for(n, settings.workers, [&](std::size_t r) {
      RandomStream rng(settings.seed, r, StreamTag::kData);
      const auto next = sgd_step(model, ChainState{{x, xbar}, 0, eta}, sample_datum(model.data(), rng));
      a[r] = next.positions[0] - x;
      b[r] = next.positions[1] - xbar;
    });
    const Vector mean_a = -eta * model.grad_risk(x);
    const Vector mean_b = -eta * model.grad_risk(xbar);
    centered_covariance(a, mean_a, b, mean_b, out.estimate, out.standard_error);
    std::vector<Vector> diff(n);
    for (std::size_t r = 0; r < n; ++r) diff[r] = a[r] - b[r];
    Matrix dcov, dse;
    centered_covariance(diff, mean_a - mean_b, diff, mean_a - mean_b, dcov, dse);
    out.difference_rate = dcov.trace() / eta;
    out.difference_se = std::sqrt(dse.diagonal().squaredNorm()) / eta;
    out.expected = eta * eta * covariance_kernel(model, x, xbar);
    return out;
  }

  const double dt = eta / settings.dt_divisor;
  const double elapsed = dt * settings.window;
  std::vector<Matrix> realized(n);
  std::vector<double> diff_realized(n);
  parallel_for(n, settings.workers, [&](std::size_t r) {
    RandomStream rng(settings.seed, r, StreamTag::kNoise);
    FlowState state{{x, xbar}, 0.0, eta, dt};
    Matrix q = Matrix::Zero(x.size(), x.size());
    double dq = 0.0;
    for (int s = 0; s < settings.window; ++s) {
      Vector m0, m1;
      if (method == CovariationMethod::kSMF) {
        const auto inc = draw_cylindrical_increment(model.data(), dt, rng);
        const auto& p = state.positions;
        m0 = sqrt_eta * integrate_cylindrical(model.data(), inc, [&](std::size_t k) { return noise_field(model, p[0], k); });
        m1 = sqrt_eta * integrate_cylindrical(model.data(), inc, [&](std::size_t k) { return noise_field(model, p[1], k); });
        state = smf_step(model, state, inc);
      } else {
        Vector dW(x.size());
        for (Eigen::Index i = 0; i < dW.size(); ++i) dW[i] = std::sqrt(dt) * rng.normal();
        const auto& p = state.positions;
        m0 = sqrt_eta * (sqrt_psd(covariance_kernel(model, p[0], p[0])) * dW);
        m1 = sqrt_eta * (sqrt_psd(covariance_kernel(model, p[1], p[1])) * dW);
        state = sme_step(model, state, dW);
      }
      q += m0 * m1.transpose();
      dq += (m0 - m1).squaredNorm();
    }
    realized[r] = q / elapsed;
    diff_realized[r] = dq / elapsed;
  });
  const double dn = static_cast<double>(n);
  Matrix mean = Matrix::Zero(x.size(), x.size());
  for (const auto& q : realized) mean += q;
  mean /= dn;
  Matrix var = Matrix::Zero(x.size(), x.size());
  for (const auto& q : realized) var += (q - mean).cwiseProduct(q - mean);
  var /= dn - 1.0;
  out.estimate = mean;
  out.standard_error = (var / dn).cwiseSqrt();
  const auto d = summarize(diff_realized);
  out.difference_rate = d.mean;
  out.difference_se = std::sqrt(d.variance / dn);
  if (method == CovariationMethod::kSMF) {
    out.expected = eta * covariance_kernel(model, x, xbar);
  } else {
    out.expected = eta * sqrt_psd(covariance_kernel(model, x, x)) * sqrt_psd(covariance_kernel(model, xbar, xbar));
  }
  return out;
}

CovariationEstimate interacting_one_step_covariance(const MeasureField& field, const Points& positions,
                                                    std::size_t i, std::size_t j, const CovariationSettings& settings) {
  require(settings.replicates >= 2, "interacting covariance: at least two replicates required");
  require(i < positions.size() && j < positions.size(), "interacting covariance: particle index out of range");
  const EmpiricalMeasure gamma(positions);
  const auto frozen = field.freeze(gamma);
  const auto n = static_cast<std::size_t>(settings.replicates);
  const double eta = settings.eta;
  std::vector<Vector> a(n), b(n);
  parallel_for(n, settings.workers, [&](std::size_t r) {
    RandomStream rng(settings.seed, r, StreamTag::kData);
    const auto next = interacting_sgd_step(field, ChainState{positions, 0, eta}, sample_datum(field.data(), rng));
    a[r] = next.positions[i] - positions[i];
    b[r] = next.positions[j] - positions[j];
  });
  CovariationEstimate out;
  out.replicates = settings.replicates;
  centered_covariance(a, eta * frozen->drift(positions[i]), b, eta * frozen->drift(positions[j]), out.estimate,
                      out.standard_error);
  out.expected = Matrix::Zero(field.dimension(), field.dimension());
  for (std::size_t k = 0; k < field.data().size(); ++k) {
    out.expected += field.data().weight(k) * frozen->noise(positions[i], k) * frozen->noise(positions[j], k).transpose();
  }
  out.expected *= eta * eta;
  return out;
}

GeneratorPieces one_step_generator_residual(const CylindricalFunctional& phi, const EmpiricalMeasure& mu,
                                            const MeasureField& field, double eta) {
  require(eta > 0.0, "generator residual: eta must be positive");
  require(mu.dimension() == field.dimension(), "generator residual: measure dimension mismatch");
  const auto frozen = field.freeze(mu);
  const auto& data = field.data();
  const std::size_t n = mu.size();
  const std::size_t atoms = data.size();
  const double w = mu.weight();

  GeneratorPieces out;
  for (std::size_t k = 0; k < atoms; ++k) {
    const auto image = push_forward(mu, [&](const Vector& y) { return Vector(y + eta * frozen->chain_direction(y, k)); });
    out.s_phi += data.weight(k) * eval_functional(phi, image);
  }

  const auto ld = lions_derivatives_on_atoms(phi, mu);
  std::vector<Vector> v(n);
  std::vector<Matrix> jac(n);
  std::vector<std::vector<Vector>> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = frozen->drift(mu[i]);
    jac[i] = frozen->drift_jacobian(mu[i]);
    for (std::size_t k = 0; k < atoms; ++k) g[i].push_back(frozen->noise(mu[i], k));
  }
  std::vector<Matrix> lions(n * n);  // lions[i * n + j] = DV(x_i, x_j)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) lions[i * n + j] = frozen->drift_lions(mu[i], mu[j]);
  }

  out.phi = ld.value;
  for (std::size_t i = 0; i < n; ++i) out.l1 += w * v[i].dot(ld.first[i]);

  double l2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Matrix a_ij = Matrix::Zero(v[i].size(), v[j].size());
      for (std::size_t k = 0; k < atoms; ++k) a_ij += data.weight(k) * g[i][k] * g[j][k].transpose();
      l2 += 0.5 * w * w * (a_ij.cwiseProduct(ld.second[i * n + j])).sum();
      l2 -= 0.5 * w * w * ld.first[i].dot(lions[i * n + j] * v[j]);
    }
    Matrix a_ii = Matrix::Zero(v[i].size(), v[i].size());
    for (std::size_t k = 0; k < atoms; ++k) a_ii += data.weight(k) * g[i][k] * g[i][k].transpose();
    l2 += 0.5 * w * (a_ii.cwiseProduct(ld.gradient[i])).sum();
    l2 -= 0.5 * w * (jac[i].transpose() * v[i]).dot(ld.first[i]);
  }
  out.l2 = l2;

  for (std::size_t i = 0; i < n; ++i) {
    Vector dl1 = jac[i].transpose() * ld.first[i] + ld.gradient[i].transpose() * v[i];
    for (std::size_t j = 0; j < n; ++j) {
      dl1 += w * (lions[j * n + i].transpose() * ld.first[j] + ld.second[j * n + i].transpose() * v[j]);
    }
    out.l1_squared += w * v[i].dot(dl1);
  }

  out.expansion = out.phi + eta * out.l1 + eta * eta * (out.l2 + 0.5 * out.l1_squared);
  out.residual = std::abs(out.s_phi - out.expansion);
  return out;
}

GeneratorPieces one_step_generator_residual(const CylindricalFunctional& phi, const EmpiricalMeasure& mu,
                                            const LossModel& model, double eta) {
  const LossField field(borrow(model));
  return one_step_generator_residual(phi, mu, field, eta);
}

double subsampled_wasserstein2(const EmpiricalMeasure& small, const EmpiricalMeasure& large, int subsamples,
                               RandomStream& rng) {
  require(small.size() <= large.size(), "subsampled W2: the first measure must not be larger than the second");
  if (small.size() == large.size()) return wasserstein2(small, large);
  require(subsamples >= 1, "subsampled W2: at least one subsample required");
  std::vector<double> gaps;
  gaps.reserve(static_cast<std::size_t>(subsamples));
  std::vector<std::size_t> index(large.size());
  for (int s = 0; s < subsamples; ++s) {
    std::iota(index.begin(), index.end(), std::size_t{0});
    Points picked;
    picked.reserve(small.size());
    for (std::size_t i = 0; i < small.size(); ++i) {
      const auto remaining = static_cast<double>(index.size() - i);
      const auto j = i + std::min(index.size() - i - 1, static_cast<std::size_t>(rng.uniform() * remaining));
      std::swap(index[i], index[j]);
      picked.push_back(large[index[i]]);
    }
    gaps.push_back(wasserstein2(small, EmpiricalMeasure(std::move(picked))));
  }
  return median(std::move(gaps));
}

std::vector<MeanfieldGapRow> meanfield_gap(const MeasureField& field, const MeanfieldGapSettings& s) {
  require(!s.m_values.empty(), "meanfield_gap: no ensemble sizes given");
  for (std::size_t i = 0; i < s.m_values.size(); ++i) {
    require(s.m_values[i] >= 1, "meanfield_gap: ensemble sizes must be positive");
    if (i > 0) require(s.m_values[i] > s.m_values[i - 1], "meanfield_gap: ensemble sizes must be increasing");
  }
  require(s.reference_size >= 4 * s.m_values.back(), "meanfield_gap: reference must have at least 4 max(M) particles");
  require(s.m_values.back() <= static_cast<int>(kMaxExactMatchingSize), "meanfield_gap: M above the exact matching limit");
  require(s.seeds >= 1, "meanfield_gap: at least one seed required");
  require(s.reference_dt_divisor >= 1, "meanfield_gap: reference dt divisor must be positive");
  require(s.initial_mean.size() == field.dimension(), "meanfield_gap: initial mean has the wrong dimension");
  require(s.initial_std >= 0.0, "meanfield_gap: initial spread must be nonnegative");
  const auto n_sgd = steps_for_horizon(s.T, s.eta);
  const auto stepper = make_ddsmf_stepper(borrow(field));
  const std::size_t sizes = s.m_values.size();

  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(s.seeds));
  std::vector<std::vector<double>> initial_gaps(static_cast<std::size_t>(s.seeds));
  parallel_for(static_cast<std::size_t>(s.seeds), s.workers, [&](std::size_t seed_index) {
    RandomStream init_rng(s.seed, seed_index, StreamTag::kInitial);
    Points initial;
    initial.reserve(static_cast<std::size_t>(s.reference_size));
    for (int i = 0; i < s.reference_size; ++i) {
      Vector p(field.dimension());
      for (Eigen::Index a = 0; a < p.size(); ++a) p[a] = s.initial_mean[a] + s.initial_std * init_rng.normal();
      initial.push_back(std::move(p));
    }
    RandomStream ref_rng(s.seed, seed_index, StreamTag::kReference);
    const double dt = s.eta / s.reference_dt_divisor;
    const auto reference =
        integrate_steps(stepper, FlowState{initial, 0.0, s.eta, dt}, n_sgd * s.reference_dt_divisor, ref_rng);
    const EmpiricalMeasure lambda(reference.back().positions);
    const EmpiricalMeasure mu(initial);

    for (std::size_t mi = 0; mi < sizes; ++mi) {
      const auto m = static_cast<std::size_t>(s.m_values[mi]);
      const Points first(initial.begin(), initial.begin() + static_cast<std::ptrdiff_t>(m));
      const auto id = cell_id(seed_index, static_cast<std::int64_t>(mi));
      RandomStream data_rng(s.seed, id, StreamTag::kData);
      const auto chain = run_chain(field, ChainState{first, 0, s.eta}, n_sgd, data_rng);
      RandomStream sub_rng(s.seed, id, StreamTag::kSubsample);
      gaps[seed_index].push_back(
          subsampled_wasserstein2(EmpiricalMeasure(chain.back().positions), lambda, s.subsamples, sub_rng));
      initial_gaps[seed_index].push_back(subsampled_wasserstein2(EmpiricalMeasure(first), mu, s.subsamples, sub_rng));
    }
  });

  std::vector<MeanfieldGapRow> rows;
  for (std::size_t mi = 0; mi < sizes; ++mi) {
    MeanfieldGapRow row;
    row.m = s.m_values[mi];
    std::vector<double> initial;
    for (int k = 0; k < s.seeds; ++k) {
      row.per_seed.push_back(gaps[static_cast<std::size_t>(k)][mi]);
      initial.push_back(initial_gaps[static_cast<std::size_t>(k)][mi]);
    }
    row.median_gap = median(row.per_seed);
    row.mean_gap = std::accumulate(row.per_seed.begin(), row.per_seed.end(), 0.0) / s.seeds;
    row.median_initial_gap = median(std::move(initial));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace smflow
