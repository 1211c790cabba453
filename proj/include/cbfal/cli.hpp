#pragma once

#include "cbfal/config.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cbfal::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kUnsafeAbort = 2,
  kVerifyFailure = 3,
  kChecksFailed = 4,
};

std::string report_text(const Report& report);
/// One JSON document; every check carries name, relation, threshold, value
/// and pass.
std::string report_json(const Report& report);

struct RunOptions {
  RunConfig config;
  bool gnuplot_script = false;
};

/// Builds, simulates and checks one scenario; writes <out>/<name>.csv (when
/// a trajectory exists) and <out>/<name>.report.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct VerifyOptions {
  std::uint64_t seed = 1;
  int cases = 1000;
  /// Scales every present-state weight of the registered functionals; any
  /// value other than 1 must make the suite fail.
  double corrupt_w0 = 1.0;
};

/// Randomized filter-oracle equivalence, finite-difference consistency of
/// registered functionals, the by-parts identity and class-K_e invariants.
/// Returns 0, or 3 with the first failing case printed for replay.
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

struct ConvergenceRow {
  double dt = 0.0;
  Vector terminal;
  double difference = 0.0;  // to the next finer dt; 0 for the finest
  double order = 0.0;       // log ratio of successive differences; NaN when undefined
};

/// Terminal states for each dt (sorted coarse to fine). Throws
/// std::invalid_argument for fewer than three dt values.
std::vector<ConvergenceRow> convergence_study(const std::string& scenario, std::vector<double> dts,
                                              const ParameterMap& overrides);

int cmd_convergence(const std::string& scenario, const std::vector<double>& dts,
                    const ParameterMap& overrides, std::ostream& out, std::ostream& err);

/// Runs independent scenarios on a worker pool; returns the largest exit
/// code.
int cmd_batch(const std::vector<RunOptions>& runs, int jobs, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cbfal::cli
