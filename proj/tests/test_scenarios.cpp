#include "cbfal/config.hpp"
#include "cbfal/scenarios.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

namespace cbfal {
namespace {

using testing::vec;

GTEST_TEST(Registry, NamesAndDefaults) {
  const std::vector<std::string> expected{"case1", "case2", "case3", "case4", "predator_prey"};
  EXPECT_EQ(scenario_names(), expected);
  EXPECT_EQ(scenario_defaults("case3").at("gamma"), 3.0);
  EXPECT_EQ(scenario_defaults("case3").at("gamma_e"), 1.0);
  EXPECT_EQ(scenario_defaults("predator_prey").at("controller_on_at"), 100.0);
  EXPECT_THROW(scenario_defaults("case5"), UnknownScenario);
  EXPECT_THROW(build("case5"), UnknownScenario);
}

GTEST_TEST(Registry, BuildShapes) {
  const Scenario c1 = build("case1");
  ASSERT_TRUE(c1.filter.has_value());
  EXPECT_EQ(c1.filter->mode, FilterMode::standard);
  EXPECT_EQ(c1.sim.dt, 1e-3);
  EXPECT_EQ(c1.sim.t_end, 50.0);

  const Scenario c3 = build("case3");
  ASSERT_TRUE(c3.filter.has_value());
  EXPECT_EQ(c3.filter->mode, FilterMode::extended);

  const Scenario c4 = build("case4");
  EXPECT_TRUE(c4.expected_invalid);
  EXPECT_FALSE(c4.filter.has_value());

  const Scenario pp = build("predator_prey");
  EXPECT_EQ(pp.plant.n, 2);
  EXPECT_EQ(pp.filter->mode, FilterMode::extended);
  EXPECT_EQ(pp.sim.controller_on_at, 100.0);

  EXPECT_FALSE(build("case2", {{"filter.enabled", 0}}).filter.has_value());
}

GTEST_TEST(Registry, InvalidOverrides) {
  EXPECT_THROW(build("case1", {{"gama", 1.0}}), InvalidOverride);
  EXPECT_THROW(build("case1", {{"gamma", -1.0}}), InvalidOverride);
  EXPECT_THROW(build("case1", {{"dt", 0.3}}), InvalidOverride);
  EXPECT_THROW(build("case1", {{"filter.enabled", 0.5}}), InvalidOverride);
  EXPECT_THROW(build("case1", {{"record_stride", 1.5}}), InvalidOverride);
  EXPECT_THROW(build("predator_prey", {{"x1_min", 0.7}}), InvalidOverride);
  EXPECT_NO_THROW(build("case1", {{"dt", 0.5}}));
}

GTEST_TEST(Registry, ParseOverride) {
  EXPECT_EQ(parse_override("gamma=2.5"), std::make_pair(std::string("gamma"), 2.5));
  EXPECT_EQ(parse_override("filter.enabled=false").second, 0.0);
  EXPECT_EQ(parse_override("filter.enabled=true").second, 1.0);
  EXPECT_THROW(parse_override("gamma"), InvalidOverride);
  EXPECT_THROW(parse_override("gamma=fast"), InvalidOverride);
  EXPECT_THROW(parse_override("=1"), InvalidOverride);
}

GTEST_TEST(PredatorPrey, EquilibriumResidual) {
  const PredatorPreyParams q;
  // (m r + p d, b p r - a d) / (a m + b p^2) with the default table.
  const Vector expected = vec({4.1 / 19.3, 3.8 / 19.3});
  EXPECT_LE((q.equilibrium() - expected).lpNorm<Eigen::Infinity>(), 1e-15);
  const ControlAffinePlant plant = predator_prey_plant(q);
  const HistoryWindow w = window_from_initial(InitialHistory::constant(expected), q.tau, 0.05);
  const Vector f = plant.drift(StateView::committed(w, 0.0));
  EXPECT_LE(f.lpNorm<Eigen::Infinity>(), 1e-12);
}

GTEST_TEST(Case4, Demonstration) {
  const Case4Report r = case4_demonstration();
  EXPECT_EQ(r.degree, RelativeDegree::invalid_no_degree);
  EXPECT_TRUE(r.extend_rejected);
  ASSERT_EQ(r.offending_lags.size(), 1u);
  EXPECT_EQ(r.offending_lags[0], 1.0);

  const Case4Report moving = case4_demonstration({{"point_coefficient", 0.0}});
  EXPECT_EQ(moving.degree, RelativeDegree::degree_two_candidate);
  EXPECT_FALSE(moving.extend_rejected);
}

GTEST_TEST(Case4, EvaluateConstructsNoSimulation) {
  const Report report = evaluate(build("case4"));
  EXPECT_EQ(report.termination, Termination::not_run);
  EXPECT_TRUE(report.all_pass());
  EXPECT_EQ(report.exit_code(), 0);
  ASSERT_TRUE(report.case4.has_value());
}

GTEST_TEST(Evaluate, ShortFilteredRunPasses) {
  const Report report = evaluate(build("case2", {{"t_end", 5.0}}));
  EXPECT_TRUE(report.all_pass());
  auto it = std::find_if(report.checks.begin(), report.checks.end(),
                         [](const Check& c) { return c.name == "invariance.min_H"; });
  ASSERT_NE(it, report.checks.end());
  EXPECT_GE(it->value, -1e-5);
}

GTEST_TEST(Evaluate, UnsafeBaselineIsWitnessed) {
  const Report report = evaluate(build("case1", {{"filter.enabled", 0}, {"t_end", 5.0}}));
  EXPECT_EQ(report.termination, Termination::non_finite);
  EXPECT_FALSE(report.safety_expected);
  EXPECT_TRUE(report.all_pass());
}

GTEST_TEST(Config, RoundTrip) {
  RunConfig config;
  config.scenario = "case3";
  config.overrides = {{"gamma", 2.75}, {"x0", 0.1 + 0.2}};
  config.dt = 5e-4;
  config.t_end = 12.5;
  config.out_dir = "results/case3";
  config.report = ReportFormat::structured;
  config.seed = 12345678901234ULL;
  std::stringstream buffer;
  write_config(buffer, config);
  const RunConfig back = read_config(buffer);
  EXPECT_EQ(back.scenario, config.scenario);
  EXPECT_EQ(back.overrides, config.overrides);
  EXPECT_EQ(back.dt, config.dt);
  EXPECT_EQ(back.t_end, config.t_end);
  EXPECT_EQ(back.out_dir, config.out_dir);
  EXPECT_EQ(back.report, config.report);
  EXPECT_EQ(back.seed, config.seed);
  EXPECT_EQ(back.effective_overrides().at("dt"), 5e-4);
}

GTEST_TEST(Config, Malformed) {
  std::istringstream unknown_key("[run]\nscenario = case1\nspeed = 3\n");
  EXPECT_THROW(read_config(unknown_key), InvalidOverride);
  std::istringstream bad_number("[overrides]\ngamma = fast\n");
  EXPECT_THROW(read_config(bad_number), InvalidOverride);
  std::istringstream bad_section("[extra]\na = 1\n");
  EXPECT_THROW(read_config(bad_section), InvalidOverride);
  EXPECT_THROW(read_config_file("/nonexistent/cbfal.ini"), InvalidOverride);
}

}  // namespace
}  // namespace cbfal
