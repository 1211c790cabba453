#include "cbfal/integrator.hpp"
#include "cbfal/scenarios.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace cbfal {
namespace {

using testing::vec;

// Closed form of xdot = x^3 from x(0) = x0.
double cubic_solution(double x0, double t) { return x0 / std::sqrt(1.0 - 2.0 * x0 * x0 * t); }

const SimRecord& record_at(const Trajectory& traj, double t) {
  for (const SimRecord& r : traj.records) {
    if (std::abs(r.t - t) < 1e-9) return r;
  }
  throw std::out_of_range("no record at requested time");
}

GTEST_TEST(Simulate, UncontrolledCubicMatchesClosedForm) {
  const Scenario s = build("case1", {{"filter.enabled", 0}, {"t_end", 3.0}});
  const Trajectory traj = simulate(s.plant, std::nullopt, s.initial, s.sim, s.cbfal.get());
  EXPECT_NEAR(record_at(traj, 2.0).x[0], 2.0 / 3.0, 5e-6);
  EXPECT_NEAR(record_at(traj, 2.0).x[0], cubic_solution(0.4, 2.0), 5e-6);
  EXPECT_NEAR(record_at(traj, 1.0).x[0], cubic_solution(0.4, 1.0), 1e-9);
  EXPECT_TRUE(traj.completed);
}

GTEST_TEST(Simulate, FiniteEscapeRaisesNonFinite) {
  const Scenario s = build("case1", {{"filter.enabled", 0}, {"t_end", 4.0}});
  try {
    (void)simulate(s.plant, std::nullopt, s.initial, s.sim, s.cbfal.get());
    FAIL() << "escape not detected";
  } catch (const NonFiniteState& e) {
    const double escape = 1.0 / (2.0 * 0.4 * 0.4);
    EXPECT_GT(e.time(), 3.0);
    EXPECT_LT(e.time(), 3.2);
    EXPECT_GE(e.time(), escape - 1e-3);
    EXPECT_FALSE(e.partial().completed);
    EXPECT_FALSE(e.partial().records.empty());
    EXPECT_LE(e.partial().final_time(), e.time());
  }
}

GTEST_TEST(Simulate, PredatorPreyEquilibriumIsStationary) {
  const Scenario s = build("predator_prey", {{"filter.enabled", 0}, {"init_at_equilibrium", 1}, {"t_end", 50}});
  const Trajectory traj = simulate(s.plant, std::nullopt, s.initial, s.sim, s.cbfal.get());
  const Vector eq = vec({4.1 / 19.3, 3.8 / 19.3});
  double worst = 0.0;
  for (const SimRecord& r : traj.records) worst = std::max(worst, (r.x - eq).lpNorm<Eigen::Infinity>());
  EXPECT_LE(worst, 1e-8);
}

GTEST_TEST(Simulate, CommittedDerivativeEqualsRightHandSide) {
  for (const std::string name : {"case1", "case2", "case3"}) {
    const Scenario s = build(name, {{"t_end", 3.0}, {"x0", 0.6}});
    const Trajectory traj = simulate(s.plant, s.filter, s.initial, s.sim);
    const HistoryWindow& w = traj.history;
    double worst = 0.0;
    for (std::size_t i = 0; i < w.size(); i += 7) {
      const Sample& sample = w[i];
      if (sample.t < 0.0) continue;
      const StateView view = StateView::committed(w, sample.t);
      const Vector u = filter(*s.filter, s.plant, view).u;
      worst = std::max(worst, (s.plant.rhs(view, u) - sample.xdot).lpNorm<Eigen::Infinity>());
    }
    EXPECT_LE(worst, 1e-12) << name;
  }
}

GTEST_TEST(Simulate, GridLagsHitStoredSamples) {
  const Scenario s = build("case2", {{"t_end", 2.5}});
  const Trajectory traj = simulate(s.plant, s.filter, s.initial, s.sim);
  const HistoryWindow& w = traj.history;
  for (double t : {1.5, 2.0, 2.5}) {
    const auto idx = w.find_sample(t - 1.0);
    ASSERT_TRUE(idx.has_value());
    EXPECT_EQ(w.eval_state(t, 1.0), w[*idx].x);
    EXPECT_EQ(w.eval_derivative(t, 1.0), w[*idx].xdot);
  }
}

GTEST_TEST(Simulate, Deterministic) {
  const Scenario s = build("case3", {{"t_end", 2.0}});
  std::ostringstream a, b;
  write_csv(simulate(s.plant, s.filter, s.initial, s.sim), a);
  write_csv(simulate(s.plant, s.filter, s.initial, s.sim), b);
  EXPECT_EQ(a.str(), b.str());
}

GTEST_TEST(Simulate, RecordStrideKeepsFinalStep) {
  const Scenario s = build("case1", {{"t_end", 1.0}, {"record_stride", 300}});
  const Trajectory traj = simulate(s.plant, s.filter, s.initial, s.sim);
  ASSERT_GE(traj.records.size(), 2u);
  EXPECT_NEAR(traj.records[1].t - traj.records[0].t, 0.3, 1e-12);
  EXPECT_NEAR(traj.final_time(), 1.0, 1e-12);
}

GTEST_TEST(Simulate, ConfigValidation) {
  SimConfig cfg;
  cfg.dt = 0.3;
  EXPECT_THROW(cfg.validate({1.0}), std::invalid_argument);
  cfg.dt = 0.25;
  EXPECT_NO_THROW(cfg.validate({1.0}));
  cfg.dt = 2.0;
  EXPECT_THROW(cfg.validate({1.0}), std::invalid_argument);
  cfg = SimConfig{};
  cfg.t_end = 0.0;
  EXPECT_THROW(cfg.validate({1.0}), std::invalid_argument);
  cfg = SimConfig{};
  cfg.record_stride = 0;
  EXPECT_THROW(cfg.validate({1.0}), std::invalid_argument);
}

GTEST_TEST(Simulate, ControllerSwitchOnTime) {
  const Scenario s = build("case1", {{"t_end", 1.0}, {"controller_on_at", 0.5}});
  const Trajectory traj = simulate(s.plant, s.filter, s.initial, s.sim);
  EXPECT_FALSE(record_at(traj, 0.499).phi.has_value());
  EXPECT_TRUE(record_at(traj, 0.5).phi.has_value());
}

GTEST_TEST(LocateSwitch, BoundFunctionalFirstSwitch) {
  const Scenario s = build("case1", {{"t_end", 3.0}});
  const Trajectory traj = simulate(s.plant, s.filter, s.initial, s.sim);
  const auto events = locate_switch(traj);
  ASSERT_FALSE(events.empty());
  // Pre-switch solution reaches x^2 = 1/2 when 1 - 0.32 t = 0.32.
  EXPECT_NEAR(events.front().t, (1.0 - 0.32) / 0.32, 1e-3);
  EXPECT_EQ(events.front().direction, -1);
  EXPECT_LE(std::abs(traj.switching(StateView::committed(traj.history, events.front().t))), 1e-9);
}

GTEST_TEST(LocateSwitch, NoFilterNoEvents) {
  const Scenario s = build("case1", {{"filter.enabled", 0}, {"t_end", 1.0}});
  const Trajectory traj = simulate(s.plant, std::nullopt, s.initial, s.sim, s.cbfal.get());
  EXPECT_TRUE(locate_switch(traj).empty());
}

GTEST_TEST(LocateSwitch, EquilibriumStaysInactive) {
  const Scenario s = build("predator_prey", {{"init_at_equilibrium", 1}, {"controller_on_at", 0}, {"t_end", 20}});
  const Trajectory traj = simulate(s.plant, s.filter, s.initial, s.sim);
  EXPECT_TRUE(locate_switch(traj).empty());
  for (const SimRecord& r : traj.records) ASSERT_GT(*r.phi, 0.0);
}

GTEST_TEST(WriteCsv, HeaderAndEmptyCells) {
  const Scenario s = build("case1", {{"filter.enabled", 0}, {"t_end", 0.01}});
  const Trajectory traj = simulate(s.plant, std::nullopt, s.initial, s.sim, s.cbfal.get());
  std::ostringstream out;
  write_csv(traj, out);
  std::istringstream in(out.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "t,x_0,u_0,H,He,phi,active");
  EXPECT_EQ(first, "0,0.40000000000000002,0,0.83999999999999997,,,0");

  const Scenario p = build("predator_prey", {{"t_end", 0.01}});
  std::ostringstream pout;
  write_csv(simulate(p.plant, p.filter, p.initial, p.sim), pout);
  EXPECT_EQ(pout.str().substr(0, pout.str().find('\n')), "t,x_0,x_1,u_0,H,He,phi,active");
}

}  // namespace
}  // namespace cbfal
