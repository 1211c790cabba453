#include "cbfal/cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace cbfal::cli {
namespace {

namespace fs = std::filesystem;

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cbfal-cli");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cbfal_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

GTEST_TEST(Cli, RunWritesCsvAndReport) {
  const fs::path dir = scratch("run");
  const Invocation r = invoke({"run", "--scenario", "case1", "--t-end", "3", "--out", dir.string()});
  EXPECT_EQ(r.code, kOk) << r.out << r.err;
  EXPECT_TRUE(fs::exists(dir / "case1.csv"));
  EXPECT_TRUE(fs::exists(dir / "case1.report"));
  EXPECT_NE(r.out.find("PASS invariance.min_H"), std::string::npos);
}

GTEST_TEST(Cli, CsvIsByteIdenticalAcrossRuns) {
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  ASSERT_EQ(invoke({"run", "--scenario", "case2", "--t-end", "2", "--out", a.string()}).code, kOk);
  ASSERT_EQ(invoke({"run", "--scenario", "case2", "--t-end", "2", "--out", b.string()}).code, kOk);
  EXPECT_EQ(slurp(a / "case2.csv"), slurp(b / "case2.csv"));
}

GTEST_TEST(Cli, StructuredReportFields) {
  const fs::path dir = scratch("json");
  const Invocation r = invoke({"run", "--scenario", "case1", "--t-end", "2", "--report", "structured",
                               "--out", dir.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto doc = nlohmann::json::parse(slurp(dir / "case1.report"));
  EXPECT_EQ(doc.at("scenario"), "case1");
  EXPECT_EQ(doc.at("exit_code"), 0);
  ASSERT_FALSE(doc.at("checks").empty());
  for (const auto& c : doc.at("checks")) {
    for (const char* key : {"name", "relation", "threshold", "value", "pass"}) {
      EXPECT_TRUE(c.contains(key)) << key;
    }
  }
}

GTEST_TEST(Cli, ConfigErrors) {
  EXPECT_EQ(invoke({"run", "--scenario", "case9"}).code, kConfigError);
  EXPECT_EQ(invoke({"run", "--scenario", "case1", "--set", "gamma=-2"}).code, kConfigError);
  EXPECT_EQ(invoke({"run", "--scenario", "case1", "--set", "nonsense"}).code, kConfigError);
  EXPECT_EQ(invoke({"run"}).code, kConfigError);
  EXPECT_EQ(invoke({"frobnicate"}).code, kConfigError);
  EXPECT_EQ(invoke({"run", "--scenario", "case1", "--config", "/nonexistent.ini"}).code, kConfigError);
}

GTEST_TEST(Cli, ConfigFileRun) {
  const fs::path dir = scratch("config");
  {
    std::ofstream ini(dir / "run.ini");
    ini << "[run]\nscenario = case2\nt_end = 1.5\nout = " << dir.string()
        << "\nreport = structured\n[overrides]\ngamma = 2\n";
  }
  const Invocation r = invoke({"run", "--config", (dir / "run.ini").string()});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "case2.csv"));
}

GTEST_TEST(Cli, DegenerateAbortWhenSafetyExpected) {
  // A huge guard turns the first active step into a degenerate constraint.
  const fs::path dir = scratch("abort");
  const Invocation r = invoke({"run", "--scenario", "case1", "--t-end", "3", "--set",
                               "epsilon_guard=100", "--out", dir.string()});
  EXPECT_EQ(r.code, kUnsafeAbort) << r.out;
}

GTEST_TEST(Cli, UnfilteredEscapeIsExpected) {
  const fs::path dir = scratch("escape");
  const Invocation r = invoke({"run", "--scenario", "case1", "--set", "filter.enabled=false",
                               "--t-end", "5", "--out", dir.string()});
  EXPECT_EQ(r.code, kOk) << r.out << r.err;
}

GTEST_TEST(Cli, Case4Demonstration) {
  const fs::path dir = scratch("case4");
  const Invocation r = invoke({"run", "--scenario", "case4", "--out", dir.string()});
  EXPECT_EQ(r.code, kOk);
  EXPECT_NE(r.out.find("invalid_no_degree"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "case4.csv"));
}

GTEST_TEST(Cli, VerifyPasses) {
  const Invocation r = invoke({"verify", "--seed", "7", "--cases", "200"});
  EXPECT_EQ(r.code, kOk) << r.out << r.err;
  EXPECT_NE(r.out.find("all suites pass"), std::string::npos);
}

GTEST_TEST(Cli, VerifyCatchesCorruptedWeight) {
  const Invocation r = invoke({"verify", "--cases", "10", "--corrupt-w0", "1.01"});
  EXPECT_EQ(r.code, kVerifyFailure);
  EXPECT_NE(r.err.find("finite-difference mismatch"), std::string::npos);
  EXPECT_NE(r.out.find("replay:"), std::string::npos);
}

GTEST_TEST(Cli, VerifyEmptySuiteWarns) {
  const Invocation r = invoke({"verify", "--cases", "0"});
  EXPECT_EQ(r.code, kOk);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

GTEST_TEST(Cli, ConvergenceNeedsThreeSteps) {
  EXPECT_EQ(invoke({"convergence", "--scenario", "case1", "--dt", "1e-3"}).code, kConfigError);
  const Invocation r =
      invoke({"convergence", "--scenario", "case1", "--dt", "4e-3,2e-3,1e-3", "--t-end", "3"});
  EXPECT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("order"), std::string::npos);
}

GTEST_TEST(Cli, BatchRunsEveryScenario) {
  const fs::path dir = scratch("batch");
  const Invocation r = invoke({"batch", "--scenarios", "case1,case2,case4", "--t-end", "1", "--jobs",
                               "2", "--out", dir.string()});
  EXPECT_EQ(r.code, kOk) << r.out << r.err;
  EXPECT_NE(r.out.find("== case4: exit 0"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "case2.csv"));
}

}  // namespace
}  // namespace cbfal::cli
