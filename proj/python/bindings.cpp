#include <memory>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "smflow/analysis.hpp"
#include "smflow/experiment.hpp"
#include "smflow/loss_models.hpp"
#include "smflow/measures.hpp"
#include "smflow/rng.hpp"
#include "smflow/sgd_chain.hpp"

namespace py = pybind11;
using namespace smflow;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Points rows_of(const RowMatrix& m) {
  Points out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

RowMatrix stack(const Points& points) {
  RowMatrix out(static_cast<Eigen::Index>(points.size()), points.empty() ? 0 : points.front().size());
  for (std::size_t i = 0; i < points.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return out;
}

std::unique_ptr<LossModel> scalar_model(const std::string& name, const std::vector<double>& atoms,
                                        const std::vector<double>& weights) {
  if (name == "shift") {
    if (atoms.empty()) return std::make_unique<ShiftModel>();
    return std::make_unique<ShiftModel>(make_discrete_distribution(atoms, weights));
  }
  if (name == "scale") {
    if (atoms.empty()) return std::make_unique<ScaleModel>();
    return std::make_unique<ScaleModel>(make_discrete_distribution(atoms, weights));
  }
  throw PreconditionError("unknown scalar model '" + name + "' (expected shift or scale)");
}

DriftMode drift_mode(bool first_order) { return first_order ? DriftMode::kFirstOrder : DriftMode::kModified; }

CovariationMethod covariation_method(const std::string& name) {
  if (name == "sgd") return CovariationMethod::kSGD;
  if (name == "smf") return CovariationMethod::kSMF;
  if (name == "sme") return CovariationMethod::kSME;
  throw PreconditionError("unknown method '" + name + "' (expected sgd, smf or sme)");
}

py::dict curve_dict(const WeakErrorCurve& c) {
  py::dict d;
  d["etas"] = c.etas;
  d["errors"] = c.errors;
  d["standard_errors"] = c.standard_errors;
  d["flow_values"] = c.flow_values;
  d["sgd_values"] = c.sgd_values;
  d["method"] = c.method;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of smflow";

  m.def("available_commands", &available_commands);
  m.def("available_models", &available_models);

  m.def(
      "run_experiment_json",
      [](const std::string& document, const std::string& command) {
        const auto config = parse_config(nlohmann::json::parse(document), command);
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(config);
        }
        return py::make_tuple(result.summary.dump(), result.curve_csv, result.trajectory_csv, result.passed);
      },
      py::arg("document"), py::arg("command") = "");

  m.def(
      "linear_oracle",
      [](double eta, double T, double x, bool first_order, double data_mean, double data_variance) {
        const auto o = closed_form_linear_oracle(eta, T, x, drift_mode(first_order), data_mean, data_variance);
        py::dict d;
        d["sgd_mean"] = o.sgd_mean;
        d["sgd_var"] = o.sgd_var;
        d["flow_mean"] = o.flow_mean;
        d["flow_var"] = o.flow_var;
        return d;
      },
      py::arg("eta"), py::arg("T"), py::arg("x"), py::arg("first_order") = false, py::arg("data_mean") = 0.0,
      py::arg("data_variance") = 1.0);

  m.def(
      "weak_error_closed_form",
      [](const std::vector<double>& etas, double T, const std::vector<double>& initial_points, int power,
         bool first_order) {
        PolynomialObservable phi;
        phi.power = power;
        return curve_dict(weak_error_curve_closed_form(etas, T, initial_points, phi, drift_mode(first_order)));
      },
      py::arg("etas"), py::arg("T"), py::arg("initial_points"), py::arg("power") = 1, py::arg("first_order") = false);

  m.def(
      "fit_order",
      [](const std::vector<double>& etas, const std::vector<double>& errors) {
        const auto f = fit_order(etas, errors);
        return py::make_tuple(f.slope, f.intercept, f.half_width);
      },
      py::arg("etas"), py::arg("errors"));

  m.def(
      "wasserstein2",
      [](const RowMatrix& a, const RowMatrix& b) {
        return wasserstein2(EmpiricalMeasure(rows_of(a)), EmpiricalMeasure(rows_of(b)));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "min_cost_assignment", [](const Matrix& cost) { return min_cost_assignment(cost); }, py::arg("cost"));

  m.def(
      "sgd_chain",
      [](const std::string& model, const RowMatrix& initial, double eta, std::int64_t steps, std::uint64_t seed,
         const std::vector<double>& atoms, const std::vector<double>& weights) {
        const auto loss = scalar_model(model, atoms, weights);
        RandomStream rng(seed, 0, StreamTag::kData);
        const auto states = run_chain(*loss, ChainState{rows_of(initial), 0, eta}, steps, rng);
        return stack(states.back().positions);
      },
      py::arg("model"), py::arg("initial"), py::arg("eta"), py::arg("steps"), py::arg("seed"),
      py::arg("atoms") = std::vector<double>{}, py::arg("weights") = std::vector<double>{});

  m.def(
      "two_point_covariation",
      [](const std::string& method, const std::string& model, double x, double xbar, double eta,
         std::int64_t replicates, std::uint64_t seed, int window, int dt_divisor, const std::vector<double>& atoms,
         const std::vector<double>& weights) {
        const auto loss = scalar_model(model, atoms, weights);
        CovariationSettings s;
        s.eta = eta;
        s.replicates = replicates;
        s.seed = seed;
        s.window = window;
        s.dt_divisor = dt_divisor;
        CovariationEstimate est;
        {
          py::gil_scoped_release release;
          est = two_point_covariation(covariation_method(method), *loss, Vector::Constant(1, x),
                                      Vector::Constant(1, xbar), s);
        }
        py::dict d;
        d["estimate"] = est.estimate(0, 0);
        d["standard_error"] = est.standard_error(0, 0);
        d["expected"] = est.expected(0, 0);
        d["difference_rate"] = est.difference_rate;
        d["difference_se"] = est.difference_se;
        return d;
      },
      py::arg("method"), py::arg("model"), py::arg("x"), py::arg("xbar"), py::arg("eta") = 0.1,
      py::arg("replicates") = 100000, py::arg("seed") = 0, py::arg("window") = 1, py::arg("dt_divisor") = 50,
      py::arg("atoms") = std::vector<double>{}, py::arg("weights") = std::vector<double>{});
}
