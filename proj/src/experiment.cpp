#include "smflow/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "smflow/analysis.hpp"
#include "smflow/functionals.hpp"
#include "smflow/integrators.hpp"
#include "smflow/parallel.hpp"
#include "smflow/sgd_chain.hpp"

namespace smflow {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- readers

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

[[noreturn]] void fail(const std::string& where, const std::string& message) {
  throw ConfigError("config: " + where + ": " + message);
}

const json& need(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where + key, "missing required entry");
  return obj.at(key);
}

double as_double(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where, "expected a finite number");
  return x;
}

double read_double(const json& obj, const std::string& key, const std::string& where) {
  return as_double(need(obj, key, where), where + key);
}

double read_double(const json& obj, const std::string& key, const std::string& where, double fallback) {
  return obj.contains(key) ? read_double(obj, key, where) : fallback;
}

std::int64_t read_int(const json& obj, const std::string& key, const std::string& where, std::int64_t fallback,
                      std::int64_t minimum) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) fail(where + key, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < minimum) fail(where + key, "must be at least " + std::to_string(minimum));
  return x;
}

bool read_bool(const json& obj, const std::string& key, const std::string& where, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) fail(where + key, "expected true or false");
  return obj.at(key).get<bool>();
}

std::string read_string(const json& obj, const std::string& key, const std::string& where, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) fail(where + key, "expected a string");
  return obj.at(key).get<std::string>();
}

std::vector<double> read_doubles(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a nonempty list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

Vector as_vector(const json& v, const std::string& where) {
  if (v.is_number()) return Vector::Constant(1, as_double(v, where));
  const auto xs = read_doubles(v, where);
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Points read_points(const json& v, const std::string& where, int dimension) {
  if (!v.is_array() || v.empty()) fail(where, "expected a nonempty list of points");
  Points out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    Vector p = as_vector(v[i], at);
    if (p.size() != dimension) fail(at, "expected dimension " + std::to_string(dimension));
    out.push_back(std::move(p));
  }
  return out;
}

DriftMode read_mode(const json& obj, const std::string& where) {
  const auto s = read_string(obj, "drift", where, "modified");
  if (s == "modified") return DriftMode::kModified;
  if (s == "first-order") return DriftMode::kFirstOrder;
  fail(where + "drift", "expected \"modified\" or \"first-order\"");
}

int read_dt_divisor(const json& obj, const std::string& key, const std::string& where) {
  return static_cast<int>(read_int(obj, key, where, kDefaultDtDivisor, kMinDtDivisor));
}

std::int64_t horizon_steps(double T, double eta, const std::string& where) {
  if (!(eta > 0.0)) fail(where, "learning rate must be positive");
  if (!(T >= 0.0)) fail(where, "horizon T must be nonnegative");
  try {
    return steps_for_horizon(T, eta);
  } catch (const PreconditionError&) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "T/eta = %.17g/%.17g is not an integer", T, eta);
    fail(where, buf);
  }
}

std::vector<double> read_etas(const json& obj, double T, const std::string& where) {
  const auto etas = read_doubles(need(obj, "etas", where), where + "etas");
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const std::string at = where + "etas[" + std::to_string(i) + "]";
    horizon_steps(T, etas[i], at);
    if (i > 0 && !(etas[i] < etas[i - 1])) fail(at, "learning rates must be strictly decreasing");
  }
  return etas;
}

// ---------------------------------------------------------------- models

struct Model {
  std::string name;
  std::shared_ptr<const LossModel> loss;
  std::shared_ptr<const NetworkModel> net;
  std::shared_ptr<const MeasureField> field;
  int dimension = 0;
};

DataDistribution read_data(const json& spec, const std::string& where, std::vector<double> default_atoms) {
  std::vector<Vector> atoms;
  if (spec.contains("atoms")) {
    const auto& a = spec.at("atoms");
    if (!a.is_array() || a.empty()) fail(where + "atoms", "expected a nonempty list");
    for (std::size_t i = 0; i < a.size(); ++i) atoms.push_back(as_vector(a[i], where + "atoms[" + std::to_string(i) + "]"));
  } else {
    if (default_atoms.empty()) fail(where + "atoms", "missing required entry");
    for (double x : default_atoms) atoms.push_back(Vector::Constant(1, x));
  }
  std::vector<double> weights(atoms.size(), 1.0);
  if (spec.contains("weights")) {
    weights = read_doubles(spec.at("weights"), where + "weights");
    if (weights.size() != atoms.size()) fail(where + "weights", "need one weight per atom");
  }
  try {
    return make_discrete_distribution(atoms, weights);
  } catch (const PreconditionError& e) {
    fail(where + "atoms", e.what());
  }
}

Model build_model(const json& doc) {
  const std::string where = "model.";
  const auto& spec = need(doc, "model", "");
  if (!spec.is_object()) fail("model", "expected an object");
  const auto name = read_string(spec, "name", where, "");
  Model m;
  m.name = name;
  try {
    if (name == "shift") {
      m.loss = std::make_shared<ShiftModel>(read_data(spec, where, {-1.0, 1.0}));
    } else if (name == "scale") {
      const int d = static_cast<int>(read_int(spec, "dimension", where, 1, 1));
      m.loss = std::make_shared<ScaleModel>(read_data(spec, where, {0.0, 2.0}), d);
    } else if (name == "polynomial") {
      const auto data = read_data(spec, where, {});
      const auto& c = need(spec, "coefficients", where);
      std::vector<std::vector<std::vector<double>>> table;
      try {
        table = c.get<std::vector<std::vector<std::vector<double>>>>();
      } catch (const json::exception&) {
        fail(where + "coefficients", "expected a list (per atom) of lists (per coordinate) of power coefficients");
      }
      m.loss = std::make_shared<PolynomialModel>(data, table);
    } else if (name == "network") {
      const auto feature_name = read_string(spec, "feature", where, "linear");
      std::shared_ptr<const FeatureMap> feature;
      DataDistribution data = read_data(spec, where, feature_name == "linear" ? std::vector<double>{-1.0, 1.0}
                                                                              : std::vector<double>{});
      const int k0 = static_cast<int>(read_int(spec, "output_dimension", where, 1, 1));
      if (feature_name == "linear") {
        if (k0 != 1) fail(where + "output_dimension", "the linear feature has scalar output");
        feature = std::make_shared<LinearFeature>(data.atom_dimension());
      } else if (feature_name == "tanh") {
        feature = std::make_shared<TanhFeature>(data.atom_dimension(), k0);
      } else {
        fail(where + "feature", "unknown feature \"" + feature_name + "\" (available: linear, tanh)");
      }
      std::vector<Vector> labels;
      if (spec.contains("labels")) {
        const auto& l = spec.at("labels");
        if (!l.is_array()) fail(where + "labels", "expected a list");
        for (std::size_t i = 0; i < l.size(); ++i) labels.push_back(as_vector(l[i], where + "labels[" + std::to_string(i) + "]"));
      } else if (feature_name == "linear") {
        labels = data.atoms();  // f(theta) = theta
      } else {
        fail(where + "labels", "missing required entry");
      }
      auto net = std::make_shared<NetworkModel>(feature, data, labels);
      m.net = net;
      m.field = std::make_shared<NetworkField>(net);
    } else {
      fail(where + "name", "unknown model \"" + name + "\" (available models: " + join(available_models()) + ")");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    fail("model", e.what());
  }
  if (m.loss) {
    m.field = std::make_shared<LossField>(m.loss);
    m.dimension = m.loss->dimension();
  } else {
    m.dimension = m.net->dimension();
  }
  return m;
}

const LossModel& need_loss(const Model& m, const std::string& command) {
  if (!m.loss) fail("model.name", command + " needs a loss model (shift, scale or polynomial)");
  return *m.loss;
}

InnerFunction read_inner(const json& spec, const std::string& where, int d) {
  const auto kind = read_string(spec, "kind", where, "");
  if (kind == "coordinate") return functionals::coordinate(d, static_cast<int>(read_int(spec, "index", where, 0, 0)));
  if (kind == "power") {
    return functionals::power(d, static_cast<int>(read_int(spec, "index", where, 0, 0)),
                              static_cast<int>(read_int(spec, "p", where, 1, 0)));
  }
  auto vec = [&](const char* key, double fill) {
    if (!spec.contains(key)) return Vector(Vector::Constant(d, fill));
    Vector v = as_vector(spec.at(key), where + key);
    if (v.size() != d) fail(where + key, "expected dimension " + std::to_string(d));
    return v;
  };
  if (kind == "sine") return functionals::sine(vec("frequency", 1.0), read_double(spec, "phase", where, 0.0));
  if (kind == "cosine") return functionals::cosine(vec("frequency", 1.0), read_double(spec, "phase", where, 0.0));
  if (kind == "gaussian_bump") return functionals::gaussian_bump(vec("center", 0.0), read_double(spec, "width", where, 1.0));
  fail(where + "kind", "unknown inner function \"" + kind + "\" (available: coordinate, power, sine, cosine, gaussian_bump)");
}

CylindricalFunctional read_functional(const json& spec, const std::string& where, int d) {
  const auto& inner_spec = need(spec, "inner", where);
  if (!inner_spec.is_array() || inner_spec.empty()) fail(where + "inner", "expected a nonempty list");
  std::vector<InnerFunction> inner;
  try {
    for (std::size_t i = 0; i < inner_spec.size(); ++i) {
      inner.push_back(read_inner(inner_spec[i], where + "inner[" + std::to_string(i) + "].", d));
    }
    const auto& outer_spec = need(spec, "outer", where);
    const std::string ow = where + "outer.";
    const auto kind = read_string(outer_spec, "kind", ow, "");
    const int arity = static_cast<int>(inner.size());
    auto coefficients = [&]() {
      Vector c = outer_spec.contains("coefficients") ? as_vector(outer_spec.at("coefficients"), ow + "coefficients")
                                                     : Vector(Vector::Ones(arity));
      if (c.size() != arity) fail(ow + "coefficients", "need one coefficient per inner function");
      return c;
    };
    OuterFunction outer;
    if (kind == "linear") {
      outer = functionals::linear(coefficients(), read_double(outer_spec, "offset", ow, 0.0));
    } else if (kind == "square_norm") {
      outer = functionals::square_norm(arity);
    } else if (kind == "product") {
      outer = functionals::product(arity);
    } else if (kind == "exponential") {
      outer = functionals::exponential(coefficients());
    } else if (kind == "constant") {
      outer = functionals::constant(arity, read_double(outer_spec, "value", ow, 0.0));
    } else {
      fail(ow + "kind", "unknown outer function \"" + kind + "\" (available: linear, square_norm, product, exponential, constant)");
    }
    return CylindricalFunctional(std::move(inner), std::move(outer));
  } catch (const ConfigError&) {
    throw;
  } catch (const PreconditionError& e) {
    fail(where, e.what());
  }
}

// ---------------------------------------------------------------- output

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Csv {
 public:
  explicit Csv(const std::string& header) : text_(header + "\n") {}
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
    text_ += "\n";
  }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

// Short form for human-readable check details.
std::string brief(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

const char* kCurveHeader = "parameter,value,method,estimate,standard_error,n";

struct Checks {
  json list = json::array();
  bool passed = true;
  void add(const std::string& name, bool ok, const std::string& detail) {
    list.push_back({{"name", name}, {"passed", ok}, {"detail", detail}});
    passed = passed && ok;
  }
};

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

json expect_block(const json& doc) {
  if (!doc.contains("expect")) return json::object();
  if (!doc.at("expect").is_object()) fail("expect", "expected an object");
  return doc.at("expect");
}

void check_slope(Checks& checks, const json& expect, const std::string& where, bool fitted, double slope) {
  if (expect.contains("slope_min")) {
    const double lo = read_double(expect, "slope_min", where);
    checks.add("slope_min", fitted && slope >= lo, fitted ? "slope " + brief(slope) + " >= " + brief(lo) : "no fit");
  }
  if (expect.contains("slope_max")) {
    const double hi = read_double(expect, "slope_max", where);
    checks.add("slope_max", fitted && slope <= hi, fitted ? "slope " + brief(slope) + " <= " + brief(hi) : "no fit");
  }
}

json fit_json(const OrderFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"half_width", f.half_width}, {"points", f.points}};
}

// ---------------------------------------------------------------- weak-error

struct WeakErrorPlan {
  Model model;
  std::vector<double> etas;
  double T = 1.0;
  Points initial;
  PolynomialObservable phi;
  bool closed_form = false;
  DriftMode mode = DriftMode::kModified;
  MonteCarloSettings mc;
  json expect;
};

WeakErrorPlan plan_weak_error(const json& doc) {
  WeakErrorPlan p;
  p.model = build_model(doc);
  p.T = read_double(doc, "T", "");
  p.etas = read_etas(doc, p.T, "");
  p.initial = doc.contains("initial_points") ? read_points(doc.at("initial_points"), "initial_points", p.model.dimension)
                                             : Points{Vector::Ones(p.model.dimension)};
  if (doc.contains("observable")) {
    const auto& o = doc.at("observable");
    p.phi.power = static_cast<int>(read_int(o, "power", "observable.", 1, 1));
    if (p.phi.power > 2) fail("observable.power", "must be 1 or 2");
    p.phi.offset = read_double(o, "offset", "observable.", 0.0);
    p.phi.coefficient = read_double(o, "coefficient", "observable.", 1.0);
  }
  p.closed_form = read_bool(doc, "closed_form", "", false);
  p.mode = read_mode(doc, "");
  if (p.closed_form) {
    if (p.model.name != "shift" || p.model.dimension != 1) fail("closed_form", "closed forms exist for the scalar shift model only");
  } else {
    need_loss(p.model, "weak-error");
  }
  p.mc.replicates = read_int(doc, "replicates", "", 10000, 2);
  p.mc.dt_divisor = read_dt_divisor(doc, "dt_divisor", "");
  p.mc.snr_floor = read_double(doc, "snr_floor", "", 2.0);
  p.mc.mode = p.mode;
  p.expect = expect_block(doc);
  if (p.expect.contains("errors")) {
    const auto& e = p.expect.at("errors");
    if (!e.is_array()) fail("expect.errors", "expected a list of {eta, value, tolerance}");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string at = "expect.errors[" + std::to_string(i) + "].";
      const double eta = read_double(e[i], "eta", at);
      if (std::find(p.etas.begin(), p.etas.end(), eta) == p.etas.end()) fail(at + "eta", "not in the sweep");
      read_double(e[i], "value", at);
      read_double(e[i], "tolerance", at);
    }
  }
  return p;
}

ExperimentResult run_weak_error(const ExperimentConfig& cfg) {
  auto p = plan_weak_error(cfg.document);
  p.mc.seed = cfg.seed;
  p.mc.workers = cfg.workers;
  WeakErrorCurve curve;
  std::size_t n = 0;
  if (p.closed_form) {
    std::vector<double> xs;
    for (const auto& x : p.initial) xs.push_back(x[0]);
    const auto& data = p.model.loss->data();
    curve = weak_error_curve_closed_form(p.etas, p.T, xs, p.phi, p.mode, data.mean()[0], data.total_variance());
  } else {
    const int d = p.model.dimension;
    const CylindricalFunctional phi({functionals::power(d, 0, p.phi.power)},
                                    functionals::linear(Vector::Constant(1, p.phi.coefficient), p.phi.offset));
    curve = weak_error_curve_monte_carlo(*p.model.loss, phi, p.etas, p.T, p.initial, p.mc);
    n = static_cast<std::size_t>(p.mc.replicates);
  }

  Csv csv(kCurveHeader);
  for (std::size_t i = 0; i < curve.etas.size(); ++i) {
    const auto eta = num(curve.etas[i]);
    csv.row({"eta", eta, "error", num(curve.errors[i]), num(curve.standard_errors[i]), std::to_string(n)});
    csv.row({"eta", eta, "flow", num(curve.flow_values[i]), num(curve.flow_standard_errors[i]), std::to_string(n)});
    csv.row({"eta", eta, "sgd", num(curve.sgd_values[i]), num(curve.sgd_standard_errors[i]), std::to_string(n)});
  }

  json results = {{"method", curve.method},
                  {"drift", p.mode == DriftMode::kModified ? "modified" : "first-order"},
                  {"T", p.T},
                  {"etas", curve.etas},
                  {"errors", curve.errors},
                  {"standard_errors", curve.standard_errors},
                  {"noise_dominated", curve.noise_dominated}};
  bool fitted = false;
  OrderFit fit;
  try {
    fit = fit_order(curve);
    fitted = true;
    results["fit"] = fit_json(fit);
  } catch (const PreconditionError& e) {
    results["fit_error"] = e.what();
  }
  Checks checks;
  check_slope(checks, p.expect, "expect.", fitted, fit.slope);
  if (p.expect.contains("errors")) {
    for (const auto& e : p.expect.at("errors")) {
      const double eta = e.at("eta").get<double>();
      const auto i = static_cast<std::size_t>(std::find(curve.etas.begin(), curve.etas.end(), eta) - curve.etas.begin());
      const double target = e.at("value").get<double>(), tol = e.at("tolerance").get<double>();
      const double gap = std::abs(curve.errors[i] - target);
      checks.add("error(" + brief(eta) + ")", gap <= tol,
                 "|" + brief(curve.errors[i]) + " - " + brief(target) + "| = " + brief(gap) + " vs tolerance " + brief(tol));
    }
  }
  ExperimentResult out;
  out.summary = {{"results", results}, {"checks", checks.list}};
  out.curve_csv = csv.text();
  out.passed = checks.passed;
  return out;
}

// ---------------------------------------------------------------- two-point

struct TwoPointPlan {
  Model model;
  Vector x, xbar;
  std::vector<CovariationMethod> methods;
  CovariationSettings settings;
  json expect;
};

CovariationMethod method_from(const std::string& s, const std::string& where) {
  if (s == "smf") return CovariationMethod::kSMF;
  if (s == "sme") return CovariationMethod::kSME;
  if (s == "sgd") return CovariationMethod::kSGD;
  fail(where, "unknown method \"" + s + "\" (available: smf, sme, sgd)");
}

TwoPointPlan plan_two_point(const json& doc) {
  TwoPointPlan p;
  p.model = build_model(doc);
  need_loss(p.model, "two-point");
  p.x = as_vector(need(doc, "x", ""), "x");
  p.xbar = as_vector(need(doc, "xbar", ""), "xbar");
  if (p.x.size() != p.model.dimension || p.xbar.size() != p.model.dimension) {
    fail("x", "probe points must have the model dimension " + std::to_string(p.model.dimension));
  }
  const auto names = doc.contains("methods") ? doc.at("methods") : json::array({"smf", "sme", "sgd"});
  if (!names.is_array() || names.empty()) fail("methods", "expected a nonempty list");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!names[i].is_string()) fail("methods[" + std::to_string(i) + "]", "expected a string");
    p.methods.push_back(method_from(names[i].get<std::string>(), "methods[" + std::to_string(i) + "]"));
  }
  p.settings.eta = read_double(doc, "eta", "");
  if (!(p.settings.eta > 0.0)) fail("eta", "must be positive");
  p.settings.window = static_cast<int>(read_int(doc, "window", "", 1, 1));
  p.settings.dt_divisor = read_dt_divisor(doc, "dt_divisor", "");
  p.settings.replicates = read_int(doc, "replicates", "", 100000, 2);
  p.expect = expect_block(doc);
  if (p.expect.contains("signs")) {
    const auto& s = p.expect.at("signs");
    if (!s.is_object()) fail("expect.signs", "expected an object such as {\"smf\": \"negative\"}");
    for (auto it = s.begin(); it != s.end(); ++it) {
      method_from(it.key(), "expect.signs." + it.key());
      const auto v = it.value().is_string() ? it.value().get<std::string>() : "";
      if (v != "negative" && v != "positive") fail("expect.signs." + it.key(), "expected \"negative\" or \"positive\"");
    }
  }
  return p;
}

std::string sign_of(double estimate, double se) {
  if (estimate + 5.0 * se < 0.0) return "negative";
  if (estimate - 5.0 * se > 0.0) return "positive";
  return "indeterminate";
}

ExperimentResult run_two_point(const ExperimentConfig& cfg) {
  auto p = plan_two_point(cfg.document);
  p.settings.seed = cfg.seed;
  p.settings.workers = cfg.workers;
  Csv csv(kCurveHeader);
  json results = json::object();
  Checks checks;
  const auto n = std::to_string(p.settings.replicates);
  const auto eta = num(p.settings.eta);
  for (auto method : p.methods) {
    const auto name = to_string(method);
    const auto est = two_point_covariation(method, *p.model.loss, p.x, p.xbar, p.settings);
    const auto d = est.estimate.rows();
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = 0; b < d; ++b) {
        const auto label = d == 1 ? name : name + "[" + std::to_string(a) + ";" + std::to_string(b) + "]";
        csv.row({"eta", eta, label, num(est.estimate(a, b)), num(est.standard_error(a, b)), n});
        csv.row({"eta", eta, label + "-expected", num(est.expected(a, b)), "0", n});
      }
    }
    csv.row({"eta", eta, name + "-difference", num(est.difference_rate), num(est.difference_se), n});
    const auto sign = sign_of(est.estimate(0, 0), est.standard_error(0, 0));
    results[name] = {{"estimate", to_json(est.estimate)},
                     {"standard_error", to_json(est.standard_error)},
                     {"expected", to_json(est.expected)},
                     {"difference_rate", est.difference_rate},
                     {"difference_se", est.difference_se},
                     {"sign", sign}};
    if (p.expect.contains("signs") && p.expect.at("signs").contains(name)) {
      const auto want = p.expect.at("signs").at(name).get<std::string>();
      checks.add("sign:" + name, sign == want,
                 "estimate " + brief(est.estimate(0, 0)) + " +- 5 x " + brief(est.standard_error(0, 0)) + " is " + sign);
    }
    if (read_bool(p.expect, "match_expected", "expect.", false)) {
      double worst = 0.0;
      bool ok = true;
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
          const double gap = std::abs(est.estimate(a, b) - est.expected(a, b));
          const double z = gap / std::max(est.standard_error(a, b), 1e-300);
          ok = ok && gap <= 5.0 * est.standard_error(a, b) + 1e-15;
          worst = std::max(worst, z);
        }
      }
      checks.add("expected:" + name, ok, "largest deviation " + brief(worst) + " standard errors");
    }
    if (p.expect.contains("zero_difference")) {
      const auto& list = p.expect.at("zero_difference");
      if (list.is_array() && std::find(list.begin(), list.end(), json(name)) != list.end()) {
        const double floor = 1e-12 * p.settings.eta;
        checks.add("zero_difference:" + name, est.difference_rate <= 5.0 * est.difference_se + floor,
                   "difference rate " + brief(est.difference_rate) + " vs 5 x " + brief(est.difference_se));
      }
    }
  }
  ExperimentResult out;
  out.summary = {{"results", results}, {"checks", checks.list}};
  out.curve_csv = csv.text();
  out.passed = checks.passed;
  return out;
}

// ---------------------------------------------------------------- generator

struct GeneratorPlan {
  Model model;
  EmpiricalMeasure measure{Points{Vector::Zero(1)}};
  std::unique_ptr<CylindricalFunctional> phi;
  std::vector<double> etas;
  json expect;
};

GeneratorPlan plan_generator(const json& doc) {
  GeneratorPlan p;
  p.model = build_model(doc);
  p.measure = EmpiricalMeasure(read_points(need(doc, "measure", ""), "measure", p.model.dimension));
  p.phi = std::make_unique<CylindricalFunctional>(read_functional(need(doc, "observable", ""), "observable.", p.model.dimension));
  p.etas = read_doubles(need(doc, "etas", ""), "etas");
  for (std::size_t i = 0; i < p.etas.size(); ++i) {
    if (!(p.etas[i] > 0.0)) fail("etas[" + std::to_string(i) + "]", "must be positive");
    if (i > 0 && !(p.etas[i] < p.etas[i - 1])) fail("etas[" + std::to_string(i) + "]", "learning rates must be strictly decreasing");
  }
  p.expect = expect_block(doc);
  return p;
}

ExperimentResult run_generator(const ExperimentConfig& cfg) {
  const auto p = plan_generator(cfg.document);
  Csv csv(kCurveHeader);
  std::vector<double> residuals;
  json rows = json::array();
  for (double eta : p.etas) {
    const auto g = one_step_generator_residual(*p.phi, p.measure, *p.model.field, eta);
    residuals.push_back(g.residual);
    const auto e = num(eta);
    csv.row({"eta", e, "residual", num(g.residual), "0", "0"});
    csv.row({"eta", e, "s_phi", num(g.s_phi), "0", "0"});
    csv.row({"eta", e, "expansion", num(g.expansion), "0", "0"});
    csv.row({"eta", e, "l1", num(g.l1), "0", "0"});
    csv.row({"eta", e, "l2", num(g.l2), "0", "0"});
    csv.row({"eta", e, "l1_squared", num(g.l1_squared), "0", "0"});
    rows.push_back({{"eta", eta}, {"phi", g.phi}, {"s_phi", g.s_phi}, {"l1", g.l1}, {"l2", g.l2},
                    {"l1_squared", g.l1_squared}, {"residual", g.residual}});
  }
  json results = {{"pieces", rows}};
  bool fitted = false;
  OrderFit fit;
  try {
    fit = fit_order(p.etas, residuals);
    fitted = true;
    results["fit"] = fit_json(fit);
  } catch (const PreconditionError& e) {
    results["fit_error"] = e.what();
  }
  Checks checks;
  check_slope(checks, p.expect, "expect.", fitted, fit.slope);
  if (p.expect.contains("residual_max")) {
    const double bound = read_double(p.expect, "residual_max", "expect.");
    const double worst = *std::max_element(residuals.begin(), residuals.end());
    checks.add("residual_max", worst <= bound, "largest residual " + brief(worst) + " vs " + brief(bound));
  }
  ExperimentResult out;
  out.summary = {{"results", results}, {"checks", checks.list}};
  out.curve_csv = csv.text();
  out.passed = checks.passed;
  return out;
}

// ---------------------------------------------------------------- meanfield

struct MeanfieldPlan {
  Model model;
  MeanfieldGapSettings settings;
  json expect;
};

MeanfieldPlan plan_meanfield(const json& doc) {
  MeanfieldPlan p;
  p.model = build_model(doc);
  auto& s = p.settings;
  const auto ms = read_doubles(need(doc, "m_values", ""), "m_values");
  for (std::size_t i = 0; i < ms.size(); ++i) {
    const std::string at = "m_values[" + std::to_string(i) + "]";
    if (ms[i] < 1 || ms[i] != std::floor(ms[i])) fail(at, "expected a positive integer");
    if (i > 0 && !(ms[i] > ms[i - 1])) fail(at, "ensemble sizes must be increasing");
    s.m_values.push_back(static_cast<int>(ms[i]));
  }
  s.reference_size = static_cast<int>(read_int(doc, "reference_size", "", 512, 1));
  if (s.reference_size < 4 * s.m_values.back()) fail("reference_size", "must be at least 4 max(m_values)");
  if (s.m_values.back() > static_cast<int>(kMaxExactMatchingSize)) fail("m_values", "sizes above 512 exceed the exact matcher");
  s.eta = read_double(doc, "eta", "");
  s.T = read_double(doc, "T", "");
  horizon_steps(s.T, s.eta, "eta");
  s.seeds = static_cast<int>(read_int(doc, "seeds", "", 20, 1));
  s.subsamples = static_cast<int>(read_int(doc, "subsamples", "", 32, 1));
  s.reference_dt_divisor = static_cast<int>(read_int(doc, "reference_dt_divisor", "", 100, kMinDtDivisor));
  s.initial_mean = Vector::Zero(p.model.dimension);
  s.initial_std = 1.0;
  if (doc.contains("initial")) {
    const auto& init = doc.at("initial");
    if (init.contains("mean")) {
      s.initial_mean = as_vector(init.at("mean"), "initial.mean");
      if (s.initial_mean.size() != p.model.dimension) fail("initial.mean", "expected the model dimension");
    }
    s.initial_std = read_double(init, "std", "initial.", 1.0);
    if (s.initial_std < 0.0) fail("initial.std", "must be nonnegative");
  }
  p.expect = expect_block(doc);
  return p;
}

ExperimentResult run_meanfield(const ExperimentConfig& cfg) {
  auto p = plan_meanfield(cfg.document);
  p.settings.seed = cfg.seed;
  p.settings.workers = cfg.workers;
  const auto rows = meanfield_gap(*p.model.field, p.settings);
  Csv csv(kCurveHeader);
  json table = json::array();
  std::vector<double> medians;
  const auto n = std::to_string(p.settings.seeds);
  for (const auto& r : rows) {
    double var = 0.0;
    for (double g : r.per_seed) var += (g - r.mean_gap) * (g - r.mean_gap);
    const double se = r.per_seed.size() > 1 ? std::sqrt(var / (r.per_seed.size() - 1.0) / r.per_seed.size()) : 0.0;
    const auto m = std::to_string(r.m);
    csv.row({"M", m, "median_gap", num(r.median_gap), "0", n});
    csv.row({"M", m, "mean_gap", num(r.mean_gap), num(se), n});
    csv.row({"M", m, "median_initial_gap", num(r.median_initial_gap), "0", n});
    table.push_back({{"M", r.m}, {"median_gap", r.median_gap}, {"mean_gap", r.mean_gap},
                     {"median_initial_gap", r.median_initial_gap}, {"per_seed", r.per_seed}});
    medians.push_back(r.median_gap);
  }
  bool strict = true, nonincreasing = true;
  for (std::size_t i = 1; i < medians.size(); ++i) {
    strict = strict && medians[i] < medians[i - 1];
    nonincreasing = nonincreasing && medians[i] <= medians[i - 1];
  }
  Checks checks;
  if (read_bool(p.expect, "strictly_decreasing", "expect.", false)) {
    checks.add("strictly_decreasing", strict, "median gaps strictly decrease in M");
  }
  if (read_bool(p.expect, "nonincreasing", "expect.", false)) {
    checks.add("nonincreasing", nonincreasing, "median gaps do not increase in M");
  }
  ExperimentResult out;
  out.summary = {{"results", {{"rows", table}, {"strictly_decreasing", strict}}}, {"checks", checks.list}};
  out.curve_csv = csv.text();
  out.passed = checks.passed;
  return out;
}

// ---------------------------------------------------------------- simulate

enum class SimMethod { kSGD, kInteracting, kSMF, kSME, kDDSMF };

struct SimulatePlan {
  Model model;
  std::vector<std::pair<std::string, SimMethod>> methods;
  double eta = 0.1;
  double T = 1.0;
  std::int64_t n_sgd = 0;
  int dt_divisor = kDefaultDtDivisor;
  std::int64_t replicates = 1;
  std::int64_t every = 1;
  DriftMode mode = DriftMode::kModified;
  Points initial;
};

SimulatePlan plan_simulate(const json& doc) {
  SimulatePlan p;
  p.model = build_model(doc);
  p.eta = read_double(doc, "eta", "");
  p.T = read_double(doc, "T", "");
  p.n_sgd = horizon_steps(p.T, p.eta, "eta");
  p.dt_divisor = read_dt_divisor(doc, "dt_divisor", "");
  p.replicates = read_int(doc, "replicates", "", 1, 1);
  p.every = read_int(doc, "checkpoint_every", "", std::max<std::int64_t>(p.n_sgd, 1), 1);
  p.mode = read_mode(doc, "");
  p.initial = read_points(need(doc, "initial_points", ""), "initial_points", p.model.dimension);
  const auto names = doc.contains("methods") ? doc.at("methods") : json::array({"sgd", "smf"});
  if (!names.is_array() || names.empty()) fail("methods", "expected a nonempty list");
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string at = "methods[" + std::to_string(i) + "]";
    const auto s = names[i].is_string() ? names[i].get<std::string>() : "";
    SimMethod m;
    if (s == "sgd") {
      m = SimMethod::kSGD;
    } else if (s == "interacting-sgd") {
      m = SimMethod::kInteracting;
    } else if (s == "smf") {
      m = SimMethod::kSMF;
    } else if (s == "sme") {
      m = SimMethod::kSME;
    } else if (s == "ddsmf") {
      m = SimMethod::kDDSMF;
    } else {
      fail(at, "unknown method \"" + s + "\" (available: sgd, interacting-sgd, smf, sme, ddsmf)");
    }
    if ((m == SimMethod::kSGD || m == SimMethod::kSMF || m == SimMethod::kSME) && !p.model.loss) {
      fail(at, s + " needs a loss model; use interacting-sgd or ddsmf for networks");
    }
    p.methods.emplace_back(s, m);
  }
  return p;
}

ExperimentResult run_simulate(const ExperimentConfig& cfg) {
  const auto p = plan_simulate(cfg.document);
  const int d = p.model.dimension;
  std::vector<std::int64_t> sgd_marks;
  for (std::int64_t s = 0; s <= p.n_sgd; s += p.every) sgd_marks.push_back(s);
  if (sgd_marks.back() != p.n_sgd) sgd_marks.push_back(p.n_sgd);
  const double dt = p.eta / p.dt_divisor;

  std::string header = "run_id,method,step_or_time,particle";
  for (int a = 0; a < d; ++a) header += ",x" + std::to_string(a);
  Csv trajectory(header);
  Csv curve(kCurveHeader);
  const auto reps = static_cast<std::size_t>(p.replicates);

  for (const auto& [name, method] : p.methods) {
    const bool chain = method == SimMethod::kSGD || method == SimMethod::kInteracting;
    // positions[r][c] = ensemble of replicate r at checkpoint c
    std::vector<std::vector<Points>> positions(reps);
    std::vector<std::vector<double>> times(reps);
    Stepper stepper;
    if (method == SimMethod::kSMF) stepper = make_smf_stepper(p.model.loss, p.mode);
    if (method == SimMethod::kSME) stepper = make_sme_stepper(p.model.loss, p.mode);
    if (method == SimMethod::kDDSMF) stepper = make_ddsmf_stepper(p.model.field, p.mode);
    parallel_for(reps, cfg.workers, [&](std::size_t r) {
      if (chain) {
        RandomStream rng(cfg.seed, r, StreamTag::kData);
        const ChainState start{p.initial, 0, p.eta};
        const auto states = method == SimMethod::kSGD ? run_chain(*p.model.loss, start, p.n_sgd, rng, sgd_marks)
                                                      : run_chain(*p.model.field, start, p.n_sgd, rng, sgd_marks);
        for (const auto& s : states) {
          positions[r].push_back(s.positions);
          times[r].push_back(static_cast<double>(s.step));
        }
      } else {
        RandomStream rng(cfg.seed, r, StreamTag::kNoise);
        std::vector<std::int64_t> marks;
        for (auto s : sgd_marks) marks.push_back(s * p.dt_divisor);
        const auto states = integrate_steps(stepper, FlowState{p.initial, 0.0, p.eta, dt}, p.n_sgd * p.dt_divisor, rng, marks);
        for (std::size_t c = 0; c < states.size(); ++c) {
          positions[r].push_back(states[c].positions);
          times[r].push_back(static_cast<double>(sgd_marks[c]) * p.eta);
        }
      }
    });
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t c = 0; c < positions[r].size(); ++c) {
        const auto when = chain ? std::to_string(static_cast<std::int64_t>(times[r][c])) : num(times[r][c]);
        for (std::size_t i = 0; i < positions[r][c].size(); ++i) {
          std::vector<std::string> cells{std::to_string(r), name, when, std::to_string(i)};
          for (int a = 0; a < d; ++a) cells.push_back(num(positions[r][c][i][a]));
          trajectory.row(cells);
        }
      }
    }
    for (std::size_t c = 0; c < sgd_marks.size(); ++c) {
      std::vector<double> means(reps);
      for (std::size_t r = 0; r < reps; ++r) {
        double m = 0.0;
        for (const auto& x : positions[r][c]) m += x[0];
        means[r] = m / static_cast<double>(positions[r][c].size());
      }
      double mean = 0.0, var = 0.0;
      for (double m : means) mean += m;
      mean /= static_cast<double>(reps);
      for (double m : means) var += (m - mean) * (m - mean);
      const double se = reps > 1 ? std::sqrt(var / (reps - 1.0) / static_cast<double>(reps)) : 0.0;
      const auto when = chain ? std::to_string(sgd_marks[c]) : num(static_cast<double>(sgd_marks[c]) * p.eta);
      curve.row({chain ? "step" : "t", when, name, num(mean), num(se), std::to_string(reps)});
      if (p.model.net) {
        std::vector<double> risks(reps);
        double risk_mean = 0.0, risk_var = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          risks[r] = p.model.net->risk(EmpiricalMeasure(positions[r][c]));
          risk_mean += risks[r] / static_cast<double>(reps);
        }
        for (double v : risks) risk_var += (v - risk_mean) * (v - risk_mean);
        const double rse = reps > 1 ? std::sqrt(risk_var / (reps - 1.0) / static_cast<double>(reps)) : 0.0;
        curve.row({chain ? "step" : "t", when, name + ".risk", num(risk_mean), num(rse), std::to_string(reps)});
      }
    }
  }
  json results = {{"checkpoints", sgd_marks}, {"replicates", p.replicates}, {"eta", p.eta}, {"T", p.T}};
  if (p.model.net) results["label_energy"] = p.model.net->label_energy();
  ExperimentResult out;
  out.summary = {{"results", results}, {"checks", json::array()}};
  out.curve_csv = curve.text();
  out.trajectory_csv = trajectory.text();
  return out;
}

void validate(const std::string& command, const json& doc) {
  if (command == "weak-error") {
    plan_weak_error(doc);
  } else if (command == "two-point") {
    plan_two_point(doc);
  } else if (command == "generator") {
    plan_generator(doc);
  } else if (command == "meanfield") {
    plan_meanfield(doc);
  } else if (command == "simulate") {
    plan_simulate(doc);
  } else {
    fail("command", "unknown command \"" + command + "\" (available: " + join(available_commands()) + ")");
  }
}

}  // namespace

std::vector<std::string> available_commands() { return {"simulate", "weak-error", "two-point", "generator", "meanfield"}; }

std::vector<std::string> available_models() { return {"shift", "scale", "polynomial", "network"}; }

ExperimentConfig parse_config(const json& document, const std::string& command) {
  if (!document.is_object()) fail("document", "expected a JSON object");
  ExperimentConfig cfg;
  cfg.document = document;
  cfg.command = command.empty() ? read_string(document, "command", "", "") : command;
  if (cfg.command.empty()) fail("command", "missing required entry");
  cfg.document["command"] = cfg.command;
  if (!document.contains("seed")) fail("seed", "missing required entry (runs are never seeded from entropy)");
  if (!document.at("seed").is_number_unsigned()) fail("seed", "expected a nonnegative integer");
  cfg.seed = document.at("seed").get<std::uint64_t>();
  cfg.workers = static_cast<int>(read_int(document, "workers", "", 1, 1));
  validate(cfg.command, cfg.document);
  return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(doc, command);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult out;
  if (cfg.command == "weak-error") {
    out = run_weak_error(cfg);
  } else if (cfg.command == "two-point") {
    out = run_two_point(cfg);
  } else if (cfg.command == "generator") {
    out = run_generator(cfg);
  } else if (cfg.command == "meanfield") {
    out = run_meanfield(cfg);
  } else if (cfg.command == "simulate") {
    out = run_simulate(cfg);
  } else {
    fail("command", "unknown command \"" + cfg.command + "\"");
  }
  json summary = {{"command", cfg.command}, {"seed", cfg.seed}, {"csv_schema_version", kCsvSchemaVersion}};
  summary.update(out.summary);
  summary["passed"] = out.passed;
  out.summary = summary;
  return out;
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(directory / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (directory / name).string());
    f << text;
  };
  write("summary.json", result.summary.dump(2) + "\n");
  write("curve.csv", result.curve_csv);
  if (!result.trajectory_csv.empty()) write("trajectory.csv", result.trajectory_csv);
}

}  // namespace smflow
