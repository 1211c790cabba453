#include "cbfal/history.hpp"
#include "cbfal/integrator.hpp"
#include "cbfal/scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace cbfal {
namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

GTEST_TEST(HistoryWindow, ConstantHistoryAnyLag) {
  const HistoryWindow w = window_from_initial(InitialHistory::constant(scalar(0.4)), 1.0, 1e-2);
  for (double lag : {0.0, 0.003, 0.25, 0.5, 0.777, 1.0}) {
    EXPECT_EQ(w.eval_state(0.0, lag)[0], 0.4) << "lag " << lag;
    EXPECT_EQ(w.eval_derivative(0.0, lag)[0], 0.0) << "lag " << lag;
  }
}

GTEST_TEST(HistoryWindow, LagZeroReturnsStoredSample) {
  HistoryWindow w(1.0);
  w.append(0.0, scalar(1.0), scalar(2.0));
  w.append(0.1, scalar(1.234567890123), scalar(-3.5));
  EXPECT_EQ(w.eval_state(0.1, 0.0)[0], 1.234567890123);
  EXPECT_EQ(w.eval_derivative(0.1, 0.0)[0], -3.5);
}

GTEST_TEST(HistoryWindow, LinearReproducesRamp) {
  const double dt = 1e-3;
  HistoryWindow w(1.0, InterpOrder::linear);
  for (int i = 0; i <= 3000; ++i) w.append(i * dt, scalar(i * dt), scalar(1.0));
  // Mid-cell queries: t - 0.5 falls halfway between samples.
  for (double t : {2.5005, 2.7003, 2.9999}) {
    EXPECT_NEAR(w.eval_state(t, 0.5)[0], t - 0.5, 1e-12);
  }
}

GTEST_TEST(HistoryWindow, HermiteReproducesCubic) {
  auto p = [](double t) { return 0.3 - 1.1 * t + 0.7 * t * t - 0.45 * t * t * t; };
  auto dp = [](double t) { return -1.1 + 1.4 * t - 1.35 * t * t; };
  const HistoryWindow w = window_from_trajectory([&](double t) { return scalar(p(t)); },
                                                 [&](double t) { return scalar(dp(t)); }, 0.0, 2.0,
                                                 0.05, 2.0);
  for (double s = 0.013; s < 2.0; s += 0.0731) {
    EXPECT_NEAR(w.state_at(s)[0], p(s), 1e-12) << "s = " << s;
  }
}

GTEST_TEST(HistoryWindow, AppendErrors) {
  HistoryWindow w(1.0);
  w.append(0.0, scalar(1.0), scalar(0.0));
  EXPECT_EQ(w.size(), 1u);
  EXPECT_THROW(w.append(0.0, scalar(1.0), scalar(0.0)), NonMonotoneTime);
  EXPECT_THROW(w.append(-0.1, scalar(1.0), scalar(0.0)), NonMonotoneTime);
}

GTEST_TEST(HistoryWindow, QueryBeforeSpanThrows) {
  HistoryWindow w(1.0);
  for (int i = 0; i <= 10; ++i) w.append(i * 0.1, scalar(i), scalar(0.0));
  EXPECT_THROW(w.state_at(-0.05), QueryOutsideSpan);
  EXPECT_THROW(w.state_at(1.05), QueryOutsideSpan);
  EXPECT_THROW(w.eval_state(1.0, 1.5), QueryOutsideSpan);
}

GTEST_TEST(HistoryWindow, PrunedSpanCoversMaxLag) {
  const double tau = 1.0;
  const double dt = 1e-3;
  HistoryWindow w(tau);
  const int steps = static_cast<int>(std::lround(2 * tau / dt));
  for (int i = 0; i <= steps; ++i) {
    w.append(i * dt, scalar(std::sin(i * dt)), scalar(std::cos(i * dt)));
    if (i * dt >= tau) {
      const double span = w.back_time() - w.front_time();
      ASSERT_GE(span, tau - 1e-12);
      ASSERT_LT(span, tau + dt);
      EXPECT_NO_THROW(w.eval_state(w.back_time(), tau));
    }
  }
}

GTEST_TEST(HistoryWindow, DerivativeRightContinuousAtJump) {
  // Derivative channel jumps from 0 to 1 at t = 0.5.
  HistoryWindow w(1.0, InterpOrder::linear);
  const double dt = 0.1;
  for (int i = 0; i <= 10; ++i) {
    const double t = i * dt;
    const double slope = i >= 5 ? 1.0 : 0.0;
    w.append(t, scalar(i >= 5 ? t - 0.5 : 0.0), scalar(slope));
  }
  EXPECT_EQ(w.derivative_at(0.5)[0], 1.0);
  EXPECT_EQ(w.derivative_at(0.4)[0], 0.0);

  // Same convention inside user-supplied initial data.
  InitialHistory initial{[](double th) { return scalar(th < -0.5 ? 0.0 : th + 0.5); },
                         [](double th) { return scalar(th < -0.5 ? 0.0 : 1.0); }};
  HistoryWindow h(1.0);
  h.append(0.0, scalar(0.5), scalar(1.0));
  h.attach_initial(initial, 0.0);
  EXPECT_EQ(h.derivative_at(-0.5)[0], 1.0);
  EXPECT_EQ(h.derivative_at(-0.5000001)[0], 0.0);
}

GTEST_TEST(HistoryWindow, DerivativeMatchesCubicAlongTrajectory) {
  // Uncontrolled scalar run xdot = x^3: the stored derivative at t - tau must
  // equal the cubed state there.
  Scenario s = build("case1", {{"filter.enabled", 0}, {"t_end", 2.0}});
  const Trajectory traj = simulate(s.plant, std::nullopt, s.initial, s.sim, s.cbfal.get());
  const HistoryWindow& w = traj.history;
  for (double t : {1.2, 1.5, 1.9, 2.0}) {
    const double x = w.eval_state(t, 1.0)[0];
    EXPECT_NEAR(w.eval_derivative(t, 1.0)[0], x * x * x, 1e-10) << "t = " << t;
  }
  // Mid-cell queries go through interpolation.
  const double t = 1.7 + 0.4e-3;
  const double x = w.eval_state(t, 1.0)[0];
  EXPECT_NEAR(w.eval_derivative(t, 1.0)[0], x * x * x, 1e-8);
}

GTEST_TEST(StateView, ProvisionalGapMatchesTrialState) {
  HistoryWindow w(1.0);
  for (int i = 0; i <= 100; ++i) w.append(i * 0.01, scalar(i * 0.01), scalar(1.0));
  const StateView v = StateView::provisional(w, 1.005, scalar(1.005));
  EXPECT_FALSE(v.is_committed());
  EXPECT_EQ(v.x(0.0)[0], 1.005);
  EXPECT_NEAR(v.x(-0.0025)[0], 1.0025, 1e-14);
  EXPECT_NEAR(v.xdot(-0.0025)[0], 1.0, 1e-12);
  const StateView c = StateView::committed(w, 0.995);
  EXPECT_TRUE(c.is_committed());
  EXPECT_NEAR(c.x(-0.5)[0], 0.495, 1e-14);
}

}  // namespace
}  // namespace cbfal
