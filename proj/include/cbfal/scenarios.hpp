#pragma once

#include "cbfal/integrator.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cbfal {

/// Flat parameter map. Boolean switches are stored as 0 or 1.
using ParameterMap = std::map<std::string, double>;

struct PredatorPreyParams {
  double r = 1.0;
  double a = 1.0;
  double p = 4.0;
  double b = 1.2;
  double m = 0.1;
  double d = 1.0;
  double tau = 5.0;
  double x1_min = 0.05;
  double x1_max = 0.6;

  /// Interior equilibrium (m r + p d, b p r - a d) / (a m + b p^2).
  Vector equilibrium() const;
};

ControlAffinePlant predator_prey_plant(const PredatorPreyParams& params);
/// Scalar plant xdot = x^3 + x(t - tau) u shared by the four scalar cases.
ControlAffinePlant cubic_plant(double tau);

/// Functional of the case4 scenario, 1 + c x^2(t - tau) / 2 - (1/tau) int x^2, with the
/// point coefficient c and the distributed term selectable.
std::shared_ptr<const CbfalSpec> case4_functional(double tau, double point_coefficient,
                                                  bool with_distributed);

struct Scenario {
  std::string name;
  std::string description;
  ParameterMap params;  // every schema key, defaults merged with overrides
  ControlAffinePlant plant;
  std::shared_ptr<const CbfalSpec> cbfal;
  bool expected_invalid = false;  // the functional must be rejected by extend
  std::optional<FilterSpec> filter;  // empty when disabled or invalid
  InitialHistory initial;
  SimConfig sim;
  /// Tolerance for the invariance and comparison checks.
  double safety_tolerance = 1e-6;
  std::vector<std::string> expected_checks;
};

/// Names in registration order.
const std::vector<std::string>& scenario_names();

/// Default parameters of a scenario. Throws UnknownScenario.
ParameterMap scenario_defaults(const std::string& name);

/// Throws UnknownScenario for unregistered names and InvalidOverride for
/// unknown keys or out-of-range values.
Scenario build(const std::string& name, const ParameterMap& overrides = {});

/// Parses "key=value"; value is a number or true/false.
std::pair<std::string, double> parse_override(const std::string& text);

// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  std::string relation;  // ">=", "<=", "<", ">", "in"
  double threshold = 0.0;
  double value = 0.0;
  bool pass = false;
};

enum class Termination { completed, non_finite, degenerate, not_run };

struct RunOutcome {
  std::shared_ptr<const Trajectory> trajectory;  // null when not run
  Termination termination = Termination::not_run;
  double end_time = 0.0;
  std::string message;
};

struct Case4Report {
  RelativeDegree degree = RelativeDegree::unknown;
  bool extend_rejected = false;
  std::string message;
  std::vector<double> offending_lags;
};

struct Report {
  std::string scenario;
  Termination termination = Termination::not_run;
  std::string message;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  std::optional<Case4Report> case4;
  /// The run was expected to stay safe (a filter was attached).
  bool safety_expected = false;

  bool all_pass() const;
  /// 0 all checks pass, 2 aborted run where safety was expected, 4 other
  /// failing checks.
  int exit_code() const;
};

std::string to_string(Termination termination);

/// Simulates the scenario, catching NonFiniteState and DegenerateConstraint.
RunOutcome run(const Scenario& scenario);

Report run_checks(const Scenario& scenario, const RunOutcome& outcome);

/// Builds the case4 scenario, classifies its functional and attempts the extension.
Case4Report case4_demonstration(const ParameterMap& overrides = {});

/// Runs the scenario (or the case4 demonstration) and checks it.
Report evaluate(const Scenario& scenario);

}  // namespace cbfal
