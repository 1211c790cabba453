#include "cbfal/scenarios.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cbfal {

namespace {

constexpr double kComparisonTolerance = 1e-5;
constexpr double kInf = std::numeric_limits<double>::infinity();

Check at_least(std::string name, double threshold, double value) {
  return {std::move(name), ">=", threshold, value, value >= threshold};
}

Check at_most(std::string name, double threshold, double value) {
  return {std::move(name), "<=", threshold, value, value <= threshold};
}

Check below(std::string name, double threshold, double value) {
  return {std::move(name), "<", threshold, value, value < threshold};
}

/// |value - target| <= tolerance; the threshold field carries the tolerance.
Check near(std::string name, double target, double tolerance, double value) {
  return {fmt::format("{} (target {})", name, target), "|d|<=", tolerance, value,
          std::abs(value - target) <= tolerance};
}

/// Linear interpolation of the first downward zero crossing of H.
std::optional<double> first_unsafe_time(const std::vector<SimRecord>& recs) {
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!recs[i].barrier || *recs[i].barrier >= 0.0) continue;
    if (i == 0) return recs[0].t;
    const double a = *recs[i - 1].barrier, b = *recs[i].barrier;
    return recs[i - 1].t + (recs[i].t - recs[i - 1].t) * a / (a - b);
  }
  return std::nullopt;
}

double min_barrier(const std::vector<SimRecord>& recs, std::size_t from, std::size_t to) {
  double lo = kInf;
  for (std::size_t i = from; i < to; ++i) {
    if (recs[i].barrier) lo = std::min(lo, *recs[i].barrier);
  }
  return lo;
}

/// Pre-switch motion of the scalar cases is xdot = x^3, so
/// x(t) = x0 / sqrt(1 - 2 x0^2 t).
double cubic_time_to_square(double x0, double square) { return (1.0 - x0 * x0 / square) / (2.0 * x0 * x0); }

void intervention_checks(const Scenario& s, const Trajectory& traj, std::size_t from, Report& report) {
  std::size_t filtered = 0, inactive = 0, mismatched = 0;
  for (std::size_t i = from; i < traj.records.size(); ++i) {
    const SimRecord& r = traj.records[i];
    if (!r.phi) continue;
    ++filtered;
    if (!r.active) ++inactive;
    // u_des is identically zero for every registered scenario.
    if (*r.phi >= 0.0 && r.u.lpNorm<Eigen::Infinity>() != 0.0) ++mismatched;
  }
  report.checks.push_back(at_most("minimal_intervention.u_equals_udes", 0.0, static_cast<double>(mismatched)));
  if (s.name == "predator_prey") {
    const double fraction = filtered ? static_cast<double>(inactive) / static_cast<double>(filtered) : 0.0;
    report.checks.push_back({"minimal_intervention.inactive_fraction", ">", 0.0, fraction, fraction > 0.0});
  }
}

void scalar_filtered_checks(const Scenario& s, const Trajectory& traj, Report& report) {
  const auto& recs = traj.records;
  const double tol = s.safety_tolerance;
  report.checks.push_back(at_least("invariance.min_H", -tol, min_barrier(recs, 0, recs.size())));

  const bool extended = s.filter->mode == FilterMode::extended;
  double he_min = kInf;
  if (extended) {
    for (const SimRecord& r : recs) he_min = std::min(he_min, r.extended_barrier.value_or(kInf));
    report.checks.push_back(at_least("invariance.min_He", -tol, he_min));
  }

  // Comparison bound with linear alpha: the guarded quantity decays no
  // faster than its initial value times exp(-gamma t).
  const double gamma = extended ? s.params.at("gamma_e") : s.params.at("gamma");
  auto guarded = [&](const SimRecord& r) { return extended ? *r.extended_barrier : *r.barrier; };
  const double start = guarded(recs.front());
  double margin = kInf;
  for (const SimRecord& r : recs) margin = std::min(margin, guarded(r) - start * std::exp(-gamma * r.t));
  report.checks.push_back(at_least(extended ? "comparison_bound.He" : "comparison_bound.H",
                                   -kComparisonTolerance, margin));

  if (s.name == "case1") {
    const double x0 = s.params.at("x0");
    const double g = s.params.at("gamma");
    const double surface = (-g + std::sqrt(g * g + 8.0 * g)) / 4.0;  // x^2 on the switching surface
    const auto events = locate_switch(traj);
    const double first = events.empty() ? kInf : events.front().t;
    const double predicted = cubic_time_to_square(x0, surface);
    if (x0 * x0 < surface && x0 > 0.0 && predicted < s.sim.t_end) {
      report.checks.push_back(near("switch.first_time", predicted, 5e-3, first));
    }
    if (s.sim.t_end >= 50.0 && x0 > 0.0) {
      const double xf = recs.back().x[0];
      report.checks.push_back(at_least("terminal.x.lower", 0.99, xf));
      report.checks.push_back(at_most("terminal.x.upper", 1.0, xf));
    }
  }
  if (s.name == "case3") {
    double peak = -kInf, state_peak = -kInf;
    for (const SimRecord& r : recs) {
      peak = std::max(peak, 1.0 - *r.barrier);
      state_peak = std::max(state_peak, std::abs(r.x[0]));
    }
    report.checks.push_back(at_most("moving_average.max", 1.0 + tol, peak));
    report.notes.push_back(fmt::format("max |x(t)| = {:.6g} (the state itself may exceed 1)", state_peak));
  }
  intervention_checks(s, traj, 0, report);
}

void predator_prey_filtered_checks(const Scenario& s, const Trajectory& traj, Report& report) {
  const auto& recs = traj.records;
  const double tol = s.safety_tolerance;
  const double on = s.sim.controller_on_at;
  std::size_t first_on = 0;
  while (first_on < recs.size() && recs[first_on].t < on - 1e-9 * s.sim.dt) ++first_on;
  // The uncontrolled phase leaves the safe set unless it starts at rest.
  if (first_on > 0 && s.params.at("init_at_equilibrium") == 0.0) {
    report.checks.push_back(below("baseline.unsafe_before_activation", 0.0, min_barrier(recs, 0, first_on)));
  }
  std::size_t enter = first_on;
  while (enter < recs.size() && !(recs[enter].barrier && *recs[enter].barrier >= 0.0)) ++enter;
  const bool entered = enter < recs.size();
  const double t_enter = entered ? recs[enter].t : kInf;
  report.checks.push_back(at_most("invariance.entered", s.sim.t_end, t_enter));
  if (entered) {
    report.notes.push_back(fmt::format("safe set entered at t = {:.6g}", t_enter));
    double x1_lo = kInf, x1_hi = -kInf;
    for (std::size_t i = enter; i < recs.size(); ++i) {
      x1_lo = std::min(x1_lo, recs[i].x[0]);
      x1_hi = std::max(x1_hi, recs[i].x[0]);
    }
    report.checks.push_back(at_least("invariance.min_H", -tol, min_barrier(recs, enter, recs.size())));
    report.checks.push_back(at_least("x1.lower", s.params.at("x1_min") - tol, x1_lo));
    report.checks.push_back(at_most("x1.upper", s.params.at("x1_max") + tol, x1_hi));
  }
  intervention_checks(s, traj, first_on, report);
}

void baseline_checks(const Scenario& s, const RunOutcome& outcome, Report& report) {
  const auto& recs = outcome.trajectory->records;
  const double horizon = s.name == "predator_prey" ? std::min(100.0, s.sim.t_end) : s.sim.t_end;
  std::size_t upto = 0;
  while (upto < recs.size() && recs[upto].t <= horizon) ++upto;
  report.checks.push_back(below("baseline.unsafe_witness", 0.0, min_barrier(recs, 0, upto)));
  if (s.name == "predator_prey") return;

  const double x0 = s.params.at("x0");
  if (x0 <= 0.0) return;
  const double escape = 1.0 / (2.0 * x0 * x0);
  if (s.name == "case1" && x0 < 1.0) {
    const auto t = first_unsafe_time(recs);
    report.checks.push_back(near("baseline.first_unsafe_time", cubic_time_to_square(x0, 1.0), 0.01,
                                 t.value_or(kInf)));
  }
  if (s.sim.t_end > 1.024 * escape) {
    const double t = outcome.termination == Termination::non_finite ? outcome.end_time : kInf;
    report.checks.push_back(
        {fmt::format("baseline.finite_escape (analytic {:.6g})", escape), "in", 0.96 * escape, t,
         t > 0.96 * escape && t < 1.024 * escape});
    report.notes.push_back(fmt::format("escape window ({:.6g}, {:.6g})", 0.96 * escape, 1.024 * escape));
  }
}

}  // namespace

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::completed: return "completed";
    case Termination::non_finite: return "non_finite_state";
    case Termination::degenerate: return "degenerate_constraint";
    case Termination::not_run: return "not_run";
  }
  return "not_run";
}

bool Report::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

int Report::exit_code() const {
  if (safety_expected &&
      (termination == Termination::non_finite || termination == Termination::degenerate)) {
    return 2;
  }
  return all_pass() ? 0 : 4;
}

RunOutcome run(const Scenario& scenario) {
  RunOutcome out;
  if (scenario.expected_invalid) return out;
  const CbfalSpec* monitor = scenario.filter ? nullptr : scenario.cbfal.get();
  try {
    auto traj = std::make_shared<Trajectory>(
        simulate(scenario.plant, scenario.filter, scenario.initial, scenario.sim, monitor));
    out.end_time = traj->final_time();
    out.trajectory = std::move(traj);
    out.termination = Termination::completed;
  } catch (const NonFiniteState& e) {
    out.trajectory = std::make_shared<Trajectory>(e.partial());
    out.termination = Termination::non_finite;
    out.end_time = e.time();
    out.message = e.what();
  } catch (const DegenerateDuringRun& e) {
    out.trajectory = std::make_shared<Trajectory>(e.partial());
    out.termination = Termination::degenerate;
    out.end_time = e.time();
    out.message = e.what();
  }
  return out;
}

Case4Report case4_demonstration(const ParameterMap& overrides) {
  const Scenario s = build("case4", overrides);
  Case4Report out;
  out.degree = classify_relative_degree(*s.cbfal, s.plant);
  for (const PointWeight& p : s.cbfal->point_weights) out.offending_lags.push_back(p.lag);
  try {
    (void)extend(s.cbfal, s.plant, ClassKeFn::linear(s.params.at("gamma")));
    out.message = "extension accepted";
  } catch (const NotExtendable& e) {
    out.extend_rejected = true;
    out.message = e.what();
  }
  return out;
}

Report run_checks(const Scenario& scenario, const RunOutcome& outcome) {
  Report report;
  report.scenario = scenario.name;
  report.termination = outcome.termination;
  report.message = outcome.message;
  report.safety_expected = scenario.filter.has_value();

  if (scenario.expected_invalid) {
    const Case4Report demo = case4_demonstration(scenario.params);
    // Without w0, any point weight leaves no relative degree; with the point
    // term removed the functional is the extendable moving average.
    const bool has_point = scenario.params.at("point_coefficient") != 0.0;
    const RelativeDegree expected = has_point ? RelativeDegree::invalid_no_degree
                                    : scenario.params.at("distributed") != 0.0
                                        ? RelativeDegree::degree_two_candidate
                                        : RelativeDegree::unknown;
    report.checks.push_back(at_least("case4.classification_as_expected", 1.0, demo.degree == expected ? 1.0 : 0.0));
    const bool should_reject = expected != RelativeDegree::degree_two_candidate;
    report.checks.push_back(
        at_least("case4.extend_outcome_as_expected", 1.0, demo.extend_rejected == should_reject ? 1.0 : 0.0));
    report.notes.push_back("classification: " + to_string(demo.degree));
    for (double lag : demo.offending_lags) report.notes.push_back(fmt::format("nonzero point weight at lag {}", lag));
    report.notes.push_back("extend: " + demo.message);
    report.notes.push_back("no simulation constructed");
    report.case4 = demo;
    return report;
  }

  if (!outcome.trajectory || outcome.trajectory->records.empty()) {
    report.checks.push_back({"trajectory.recorded", ">=", 1.0, 0.0, false});
    return report;
  }
  const Trajectory& traj = *outcome.trajectory;
  if (scenario.filter) {
    report.checks.push_back({"completed", ">=", scenario.sim.t_end, outcome.end_time,
                             outcome.termination == Termination::completed});
    if (scenario.name == "predator_prey") predator_prey_filtered_checks(scenario, traj, report);
    else scalar_filtered_checks(scenario, traj, report);
  } else {
    baseline_checks(scenario, outcome, report);
  }
  return report;
}

Report evaluate(const Scenario& scenario) { return run_checks(scenario, run(scenario)); }

}  // namespace cbfal
