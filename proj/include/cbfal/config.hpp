#pragma once

#include "cbfal/scenarios.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace cbfal {

enum class ReportFormat { text, structured };

/// Everything a `run` needs. Paper defaults live in the scenario registry;
/// a config file carries only the choices made on top of them.
struct RunConfig {
  std::string scenario;
  ParameterMap overrides;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::string out_dir = ".";
  ReportFormat report = ReportFormat::text;
  std::uint64_t seed = 1;

  /// Overrides with the dt and t_end shortcuts folded in.
  ParameterMap effective_overrides() const;
};

/// INI layout:
///   [run]        scenario, dt, t_end, out, report, seed
///   [overrides]  key = value, one scenario parameter per line
/// Throws InvalidOverride on malformed content.
RunConfig read_config(std::istream& in);
RunConfig read_config_file(const std::string& path);
void write_config(std::ostream& out, const RunConfig& config);

}  // namespace cbfal
