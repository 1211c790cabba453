#include "cbfal/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <fstream>

namespace cbfal {

namespace pt = boost::property_tree;

ParameterMap RunConfig::effective_overrides() const {
  ParameterMap out = overrides;
  if (dt) out["dt"] = *dt;
  if (t_end) out["t_end"] = *t_end;
  return out;
}

namespace {

double number(const std::string& key, const std::string& text) {
  return parse_override(key + "=" + text).second;
}

}  // namespace

RunConfig read_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InvalidOverride(fmt::format("config: {}", e.what()));
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (section == "run") {
      for (const auto& [key, node] : body) {
        const std::string value = node.data();
        if (key == "scenario") config.scenario = value;
        else if (key == "dt") config.dt = number(key, value);
        else if (key == "t_end") config.t_end = number(key, value);
        else if (key == "out") config.out_dir = value;
        else if (key == "seed") config.seed = std::stoull(value);
        else if (key == "report") {
          if (value == "text") config.report = ReportFormat::text;
          else if (value == "structured") config.report = ReportFormat::structured;
          else throw InvalidOverride(fmt::format("config: report must be text or structured, got '{}'", value));
        } else {
          throw InvalidOverride(fmt::format("config: unknown key '{}' in [run]", key));
        }
      }
    } else if (section == "overrides") {
      for (const auto& [key, node] : body) config.overrides[key] = number(key, node.data());
    } else {
      throw InvalidOverride(fmt::format("config: unknown section [{}]", section));
    }
  }
  return config;
}

RunConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidOverride(fmt::format("cannot open config file '{}'", path));
  return read_config(in);
}

void write_config(std::ostream& out, const RunConfig& config) {
  pt::ptree run;
  auto put = [](pt::ptree& tree, const std::string& key, const std::string& value) {
    tree.push_back({key, pt::ptree(value)});
  };
  put(run, "scenario", config.scenario);
  if (config.dt) put(run, "dt", fmt::format("{:.17g}", *config.dt));
  if (config.t_end) put(run, "t_end", fmt::format("{:.17g}", *config.t_end));
  put(run, "out", config.out_dir);
  put(run, "report", config.report == ReportFormat::text ? "text" : "structured");
  put(run, "seed", std::to_string(config.seed));
  pt::ptree overrides;
  for (const auto& [key, value] : config.overrides) put(overrides, key, fmt::format("{:.17g}", value));
  pt::ptree tree;
  tree.push_back({"run", run});
  tree.push_back({"overrides", overrides});
  pt::write_ini(out, tree);
}

}  // namespace cbfal
