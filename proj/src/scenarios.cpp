#include "cbfal/scenarios.hpp"

#include "cbfal/quadrature.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace cbfal {

namespace {

Vector scalar(double v) {
  Vector out(1);
  out[0] = v;
  return out;
}

RowVector row(double v) {
  RowVector out(1);
  out[0] = v;
  return out;
}

// ---------------------------------------------------------------------------
// Scalar functionals on the cubic plant.

std::shared_ptr<const CbfalSpec> bound_functional(double tau) {
  auto spec = std::make_shared<CbfalSpec>();
  spec->name = "case1";
  spec->max_lag = tau;
  spec->value = [](const StateView& v) {
    const double x = v.x(0.0)[0];
    return 1.0 - x * x;
  };
  spec->w0 = [](const StateView& v) { return row(-2.0 * v.x(0.0)[0]); };
  return spec;
}

std::shared_ptr<const CbfalSpec> squared_mean_functional(double tau) {
  auto spec = std::make_shared<CbfalSpec>();
  spec->name = "case2";
  spec->max_lag = tau;
  spec->value = [tau](const StateView& v) {
    const double x = v.x(0.0)[0];
    const double xd = v.x(-tau)[0];
    return 1.0 - 0.5 * (x * x + xd * xd);
  };
  spec->w0 = [](const StateView& v) { return row(-v.x(0.0)[0]); };
  spec->point_weights.push_back({tau, [tau](const StateView& v) { return row(-v.x(-tau)[0]); }});
  return spec;
}

/// (x^2(t - tau) - x^2(t)) / tau, the rate of the moving-average functional.
std::shared_ptr<const CbfalSpec> moving_average_rate(double tau) {
  auto spec = std::make_shared<CbfalSpec>();
  spec->name = "moving_average_rate";
  spec->max_lag = tau;
  spec->value = [tau](const StateView& v) {
    const double x = v.x(0.0)[0];
    const double xd = v.x(-tau)[0];
    return (xd * xd - x * x) / tau;
  };
  spec->w0 = [tau](const StateView& v) { return row(-2.0 * v.x(0.0)[0] / tau); };
  spec->point_weights.push_back(
      {tau, [tau](const StateView& v) { return row(2.0 * v.x(-tau)[0] / tau); }});
  return spec;
}

/// (1/tau) int (1 - x^2) over [-tau, 0] in weight form.
DistributedWeight moving_average_weight(double tau) {
  DistributedWeight dist;
  dist.sigma1 = tau;
  dist.sigma2 = 0.0;
  dist.weight = [tau](const StateView& v, double theta) { return row(-2.0 * v.x(theta)[0] / tau); };
  ByPartsForm form;
  form.factor = [tau](const StateView&, double) { return row(1.0 / tau); };
  form.factor_derivative = [](const StateView&, double) { return row(0.0); };
  form.inner = [](const Vector& x) { return scalar(1.0 - x[0] * x[0]); };
  dist.by_parts = std::move(form);
  return dist;
}

double mean_square(const StateView& v, double tau) {
  return integrate(v, -tau, 0.0, [](const HistoryPoint& p) { return p.x[0] * p.x[0]; }) / tau;
}

std::shared_ptr<const CbfalSpec> moving_average_functional(double tau) {
  auto spec = std::make_shared<CbfalSpec>();
  spec->name = "case3";
  spec->max_lag = tau;
  spec->value = [tau](const StateView& v) { return 1.0 - mean_square(v, tau); };
  spec->distributed = moving_average_weight(tau);
  spec->lie_derivative = moving_average_rate(tau);
  return spec;
}

// ---------------------------------------------------------------------------
// Predator-prey.

double prey_rate(const PredatorPreyParams& q, const Vector& x) {
  return q.r * x[0] - q.a * x[0] * x[0] - q.p * x[0] * x[1];
}

std::shared_ptr<const CbfalSpec> prey_band_functional(const PredatorPreyParams& q) {
  const double mid = 0.5 * (q.x1_min + q.x1_max);

  auto rate = std::make_shared<CbfalSpec>();
  rate->name = "prey_band_rate";
  rate->n = 2;
  rate->max_lag = q.tau;
  rate->value = [q, mid](const StateView& v) {
    const Vector x = v.x(0.0);
    return 2.0 * (mid - x[0]) * prey_rate(q, x);
  };
  rate->w0 = [q, mid](const StateView& v) {
    const Vector x = v.x(0.0);
    RowVector w(2);
    w[0] = -2.0 * prey_rate(q, x) + 2.0 * (mid - x[0]) * (q.r - 2.0 * q.a * x[0] - q.p * x[1]);
    w[1] = -2.0 * q.p * (mid - x[0]) * x[0];
    return w;
  };

  auto spec = std::make_shared<CbfalSpec>();
  spec->name = "predator_prey";
  spec->n = 2;
  spec->max_lag = q.tau;
  spec->value = [q](const StateView& v) {
    const double x1 = v.x(0.0)[0];
    return -(x1 - q.x1_min) * (x1 - q.x1_max);
  };
  spec->w0 = [mid](const StateView& v) {
    RowVector w(2);
    w[0] = 2.0 * (mid - v.x(0.0)[0]);
    w[1] = 0.0;
    return w;
  };
  spec->lie_derivative = std::move(rate);
  return spec;
}

// ---------------------------------------------------------------------------
// Parameter schema.

struct Schema {
  ParameterMap defaults;
  std::vector<std::string> positive;
  std::vector<std::string> flags;
};

const std::vector<std::string> kNames{"case1", "case2", "case3", "case4", "predator_prey"};

Schema schema_for(const std::string& name) {
  Schema s;
  if (name == "predator_prey") {
    const PredatorPreyParams q;
    s.defaults = {{"r", q.r},         {"a", q.a},
                  {"p", q.p},         {"b", q.b},
                  {"m", q.m},         {"d", q.d},
                  {"tau", q.tau},     {"x1_min", q.x1_min},
                  {"x1_max", q.x1_max}, {"gamma", 1.0},
                  {"gamma_e", 1.0},   {"x0_1", 0.1},
                  {"x0_2", 0.1},      {"init_at_equilibrium", 0.0},
                  {"dt", 1e-3},       {"t_end", 200.0},
                  {"record_stride", 1.0}, {"controller_on_at", 100.0},
                  {"filter.enabled", 1.0}, {"epsilon_guard", 1e-10}};
    s.positive = {"r", "a", "p", "b", "m", "d", "tau", "gamma", "gamma_e", "dt", "t_end"};
    s.flags = {"init_at_equilibrium", "filter.enabled"};
    return s;
  }
  if (std::find(kNames.begin(), kNames.end(), name) == kNames.end()) {
    throw UnknownScenario(fmt::format("unknown scenario '{}'", name));
  }
  s.defaults = {{"tau", 1.0},     {"gamma", 1.0},         {"x0", 0.4},
                {"dt", 1e-3},     {"t_end", 50.0},        {"record_stride", 1.0},
                {"controller_on_at", 0.0}, {"filter.enabled", 1.0}, {"epsilon_guard", 1e-10}};
  s.positive = {"tau", "gamma", "dt", "t_end"};
  s.flags = {"filter.enabled"};
  if (name == "case3" || name == "case4") {
    s.defaults["gamma_e"] = 1.0;
    s.positive.push_back("gamma_e");
  }
  if (name == "case3") s.defaults["gamma"] = 3.0;
  if (name == "case4") {
    s.defaults["point_coefficient"] = 1.0;
    s.defaults["distributed"] = 1.0;
    s.flags.push_back("distributed");
  }
  return s;
}

ParameterMap resolve(const std::string& name, const ParameterMap& overrides) {
  const Schema schema = schema_for(name);
  ParameterMap params = schema.defaults;
  for (const auto& [key, value] : overrides) {
    auto it = params.find(key);
    if (it == params.end()) {
      throw InvalidOverride(fmt::format("'{}' is not a parameter of scenario '{}'", key, name));
    }
    if (!std::isfinite(value)) throw InvalidOverride(fmt::format("'{}' must be finite", key));
    it->second = value;
  }
  for (const std::string& key : schema.positive) {
    if (!(params[key] > 0.0)) throw InvalidOverride(fmt::format("'{}' must be positive", key));
  }
  for (const std::string& key : schema.flags) {
    if (params[key] != 0.0 && params[key] != 1.0) {
      throw InvalidOverride(fmt::format("'{}' must be true/false (1/0)", key));
    }
  }
  const double stride = params["record_stride"];
  if (stride < 1.0 || stride != std::floor(stride)) {
    throw InvalidOverride("'record_stride' must be a positive integer");
  }
  if (params["epsilon_guard"] < 0.0) throw InvalidOverride("'epsilon_guard' must be non-negative");
  if (params["controller_on_at"] < 0.0) throw InvalidOverride("'controller_on_at' must be non-negative");
  if (name == "predator_prey" && !(params["x1_min"] < params["x1_max"])) {
    throw InvalidOverride(fmt::format("x1_min = {} must be below x1_max = {}", params["x1_min"],
                                      params["x1_max"]));
  }
  const double ratio = params["tau"] / params["dt"];
  if (std::round(ratio) < 1.0 || std::abs(ratio - std::round(ratio)) > 1e-12 * ratio) {
    throw InvalidOverride(fmt::format("dt = {} does not divide tau = {}", params["dt"], params["tau"]));
  }
  return params;
}

SimConfig sim_config(const ParameterMap& p) {
  SimConfig cfg;
  cfg.dt = p.at("dt");
  cfg.t_end = p.at("t_end");
  cfg.record_stride = static_cast<int>(p.at("record_stride"));
  cfg.controller_on_at = p.at("controller_on_at");
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------

Vector PredatorPreyParams::equilibrium() const {
  const double den = a * m + b * p * p;
  Vector e(2);
  e[0] = (m * r + p * d) / den;
  e[1] = (b * p * r - a * d) / den;
  return e;
}

ControlAffinePlant predator_prey_plant(const PredatorPreyParams& q) {
  ControlAffinePlant plant;
  plant.name = "predator_prey";
  plant.n = 2;
  plant.m = 1;
  plant.max_lag = q.tau;
  plant.drift = [q](const StateView& v) {
    const Vector x = v.x(0.0);
    const Vector xd = v.x(-q.tau);
    Vector f(2);
    f[0] = prey_rate(q, x);
    f[1] = q.b * q.p * xd[0] * xd[1] - q.d * x[1] - q.m * x[1] * x[1];
    return f;
  };
  plant.input = [](const StateView&) {
    Matrix g(2, 1);
    g << 0.0, 1.0;
    return g;
  };
  return plant;
}

ControlAffinePlant cubic_plant(double tau) {
  ControlAffinePlant plant;
  plant.name = "cubic";
  plant.n = 1;
  plant.m = 1;
  plant.max_lag = tau;
  plant.drift = [](const StateView& v) {
    const double x = v.x(0.0)[0];
    return scalar(x * x * x);
  };
  plant.input = [tau](const StateView& v) {
    Matrix g(1, 1);
    g(0, 0) = v.x(-tau)[0];
    return g;
  };
  return plant;
}

std::shared_ptr<const CbfalSpec> case4_functional(double tau, double point_coefficient,
                                                  bool with_distributed) {
  auto spec = std::make_shared<CbfalSpec>();
  spec->name = "case4";
  spec->max_lag = tau;
  const double c = point_coefficient;
  spec->value = [tau, c, with_distributed](const StateView& v) {
    const double xd = v.x(-tau)[0];
    return 1.0 + 0.5 * c * xd * xd - (with_distributed ? mean_square(v, tau) : 0.0);
  };
  if (c != 0.0) {
    spec->point_weights.push_back({tau, [tau, c](const StateView& v) { return row(c * v.x(-tau)[0]); }});
  }
  if (with_distributed) spec->distributed = moving_average_weight(tau);
  // Without the point term the functional is the moving average, whose rate
  // is known in weight form.
  if (c == 0.0 && with_distributed) spec->lie_derivative = moving_average_rate(tau);
  return spec;
}

const std::vector<std::string>& scenario_names() { return kNames; }

ParameterMap scenario_defaults(const std::string& name) { return schema_for(name).defaults; }

std::pair<std::string, double> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidOverride(fmt::format("override '{}' is not of the form key=value", text));
  }
  std::string key = text.substr(0, eq);
  const std::string value = text.substr(eq + 1);
  if (value == "true") return {key, 1.0};
  if (value == "false") return {key, 0.0};
  char* end = nullptr;
  const double number = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw InvalidOverride(fmt::format("value '{}' for '{}' is not a number or true/false", value, key));
  }
  return {key, number};
}

Scenario build(const std::string& name, const ParameterMap& overrides) {
  Scenario s;
  s.name = name;
  s.params = resolve(name, overrides);
  const ParameterMap& p = s.params;
  s.sim = sim_config(p);
  const bool enabled = p.at("filter.enabled") != 0.0;
  const double eps = p.at("epsilon_guard");

  if (name == "predator_prey") {
    PredatorPreyParams q;
    q.r = p.at("r");
    q.a = p.at("a");
    q.p = p.at("p");
    q.b = p.at("b");
    q.m = p.at("m");
    q.d = p.at("d");
    q.tau = p.at("tau");
    q.x1_min = p.at("x1_min");
    q.x1_max = p.at("x1_max");
    s.description = "delayed predator-prey model, prey kept within [x1_min, x1_max]";
    s.plant = predator_prey_plant(q);
    s.cbfal = prey_band_functional(q);
    Vector x0(2);
    x0 << p.at("x0_1"), p.at("x0_2");
    if (p.at("init_at_equilibrium") != 0.0) x0 = q.equilibrium();
    s.initial = InitialHistory::constant(x0);
    s.safety_tolerance = 1e-4;
    if (enabled) {
      ProbeOptions probes;
      probes.extra = &s.initial;
      FilterSpec f = FilterSpec::extended_filter(
          extend(s.cbfal, s.plant, ClassKeFn::linear(p.at("gamma")), probes),
          ClassKeFn::linear(p.at("gamma_e")));
      f.epsilon_guard = eps;
      s.filter = std::move(f);
      s.expected_checks = {"completed", "baseline.unsafe_before_activation", "invariance.entered",
                           "invariance.min_H", "x1.lower", "x1.upper",
                           "minimal_intervention.inactive_fraction",
                           "minimal_intervention.u_equals_udes"};
    } else {
      s.expected_checks = {"baseline.unsafe_witness"};
    }
    return s;
  }

  const double tau = p.at("tau");
  s.plant = cubic_plant(tau);
  s.initial = InitialHistory::constant(scalar(p.at("x0")));
  const ClassKeFn alpha = ClassKeFn::linear(p.at("gamma"));

  if (name == "case4") {
    s.description = "point plus distributed delay functional without a valid relative degree";
    s.cbfal = case4_functional(tau, p.at("point_coefficient"), p.at("distributed") != 0.0);
    s.expected_invalid = true;
    s.expected_checks = {"case4.classification", "case4.extend_outcome"};
    return s;
  }

  s.safety_tolerance = name == "case1" ? 1e-6 : 1e-5;
  if (name == "case1") {
    s.description = "keep x(t) within [-1, 1]";
    s.cbfal = bound_functional(tau);
  } else if (name == "case2") {
    s.description = "keep the squared mean of x(t) and x(t - tau) below 1";
    s.cbfal = squared_mean_functional(tau);
  } else {
    s.description = "keep the moving mean square of x below 1 (extended functional)";
    s.cbfal = moving_average_functional(tau);
  }
  if (enabled) {
    FilterSpec f;
    if (name == "case3") {
      ProbeOptions probes;
      probes.extra = &s.initial;
      f = FilterSpec::extended_filter(extend(s.cbfal, s.plant, alpha, probes),
                                      ClassKeFn::linear(p.at("gamma_e")));
    } else {
      f = FilterSpec::standard_filter(s.cbfal, alpha);
    }
    f.epsilon_guard = eps;
    s.filter = std::move(f);
    s.expected_checks = {"completed", "invariance.min_H", "comparison_bound",
                         "minimal_intervention.u_equals_udes"};
    if (name == "case1") {
      s.expected_checks.push_back("switch.first_time");
      s.expected_checks.push_back("terminal.x");
    }
    if (name == "case3") {
      s.expected_checks.push_back("invariance.min_He");
      s.expected_checks.push_back("moving_average.max");
    }
  } else {
    s.expected_checks = {"baseline.unsafe_witness", "baseline.finite_escape"};
    if (name == "case1") s.expected_checks.push_back("baseline.first_unsafe_time");
  }
  return s;
}

}  // namespace cbfal
