#include "cbfal/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace cbfal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Reports

std::string report_text(const Report& report) {
  std::string s = fmt::format("scenario: {}\ntermination: {}\n", report.scenario, to_string(report.termination));
  if (!report.message.empty()) s += fmt::format("message: {}\n", report.message);
  for (const Check& c : report.checks) {
    s += fmt::format("{} {}: value {:.10g} {} {:.10g}\n", c.pass ? "PASS" : "FAIL", c.name, c.value,
                     c.relation, c.threshold);
  }
  for (const std::string& note : report.notes) s += fmt::format("note: {}\n", note);
  s += fmt::format("exit code: {}\n", report.exit_code());
  return s;
}

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(fmt::format("{}", v)); }

}  // namespace

std::string report_json(const Report& report) {
  json doc;
  doc["scenario"] = report.scenario;
  doc["termination"] = to_string(report.termination);
  doc["message"] = report.message;
  doc["exit_code"] = report.exit_code();
  doc["checks"] = json::array();
  for (const Check& c : report.checks) {
    doc["checks"].push_back({{"name", c.name},
                             {"relation", c.relation},
                             {"threshold", number(c.threshold)},
                             {"value", number(c.value)},
                             {"pass", c.pass}});
  }
  doc["notes"] = report.notes;
  if (report.case4) {
    doc["case4"] = {{"classification", to_string(report.case4->degree)},
                    {"extend_rejected", report.case4->extend_rejected},
                    {"message", report.case4->message},
                    {"offending_lags", report.case4->offending_lags}};
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// run

namespace {

void write_gnuplot(const fs::path& path, const std::string& name, const Trajectory& traj) {
  std::ofstream gp(path);
  const int n = traj.n, m = traj.m;
  gp << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set terminal pngcairo size 1000,900\n"
     << fmt::format("set output '{}.png'\n", name) << "set multiplot layout 3,1\n"
     << "set xlabel 't'\n";
  auto plot_columns = [&](int first, int count) {
    gp << "plot ";
    for (int k = 0; k < count; ++k) {
      gp << fmt::format("{}'{}.csv' using 1:{} with lines", k ? ", " : "", name, first + k);
    }
    gp << "\n";
  };
  plot_columns(2, n);
  plot_columns(2 + n, m);
  plot_columns(2 + n + m, 1);
  gp << "unset multiplot\n";
}

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  const RunConfig& cfg = options.config;
  Scenario scenario;
  try {
    scenario = build(cfg.scenario, cfg.effective_overrides());
  } catch (const UnknownScenario& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidOverride& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  if (scenario.filter) {
    err << "warning: the filtered right-hand side is assumed to meet the same regularity conditions as the "
           "drift; this is not checked\n";
  }
  const RunOutcome outcome = run(scenario);
  const Report report = run_checks(scenario, outcome);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) {
    err << fmt::format("error: cannot create output directory '{}': {}\n", cfg.out_dir, ec.message());
    return kConfigError;
  }
  const fs::path dir(cfg.out_dir);
  if (outcome.trajectory) {
    std::ofstream csv(dir / (scenario.name + ".csv"));
    write_csv(*outcome.trajectory, csv);
    if (options.gnuplot_script) write_gnuplot(dir / (scenario.name + ".gp"), scenario.name, *outcome.trajectory);
  }
  const std::string text =
      cfg.report == ReportFormat::structured ? report_json(report) : report_text(report);
  std::ofstream(dir / (scenario.name + ".report")) << text;
  out << text;
  for (const Check& c : report.checks) {
    if (!c.pass) err << fmt::format("check failed: {} (value {:.10g}, {} {:.10g})\n", c.name, c.value, c.relation, c.threshold);
  }
  return report.exit_code();
}

// ---------------------------------------------------------------------------
// verify

namespace {

struct SuiteFailure {
  std::string suite;
  std::string detail;
  json replay;
};

class Suites {
 public:
  Suites(const VerifyOptions& options, std::ostream& out) : options_(options), out_(out) {}

  std::optional<SuiteFailure> kkt() {
    std::mt19937_64 rng(options_.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<int> dim(1, 3);
    for (int i = 0; i < options_.cases; ++i) {
      const int m = dim(rng);
      const double phi = 5.0 * unit(rng);
      RowVector phi0(m);
      Vector u_des(m);
      do {
        for (int k = 0; k < m; ++k) phi0[k] = 3.0 * unit(rng);
      } while (phi0.norm() < 0.05);
      for (int k = 0; k < m; ++k) u_des[k] = 5.0 * unit(rng);
      const Vector closed = min_norm_correction(phi, phi0, u_des).u;
      const Vector oracle = brute_force_oracle(phi, phi0, u_des);
      const double error = (closed - oracle).lpNorm<Eigen::Infinity>();
      if (!(error <= 1e-9)) {
        return SuiteFailure{"kkt_oracle", fmt::format("case {}: |u - u_oracle| = {:.3g} > 1e-9", i, error),
                            {{"seed", options_.seed}, {"case", i}, {"phi", phi},
                             {"phi0", std::vector<double>(phi0.data(), phi0.data() + m)},
                             {"u_des", std::vector<double>(u_des.data(), u_des.data() + m)}}};
      }
    }
    out_ << fmt::format("kkt_oracle: {} cases pass\n", options_.cases);
    return std::nullopt;
  }

  std::optional<SuiteFailure> finite_differences() {
    std::mt19937_64 rng(options_.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int checked = 0;
    for (const auto& [label, spec, positive] : registered_specs()) {
      const double tau = spec.max_lag;
      const double dt = tau / 1000.0;
      for (int trial = 0; trial < 3; ++trial) {
        Vector c(spec.n), a(spec.n), omega(spec.n), phase(spec.n);
        for (int k = 0; k < spec.n; ++k) {
          c[k] = positive ? 0.15 + 0.3 * unit(rng) : 1.2 * unit(rng) - 0.6;
          a[k] = positive ? 0.05 + 0.08 * unit(rng) : 0.1 + 0.3 * unit(rng);
          omega[k] = 0.5 + 2.5 * unit(rng);
          phase[k] = 6.283185307179586 * unit(rng);
        }
        auto x = [=](double t) {
          Vector v(c.size());
          for (int k = 0; k < c.size(); ++k) v[k] = c[k] + a[k] * std::sin(omega[k] * t + phase[k]);
          return v;
        };
        auto xdot = [=](double t) {
          Vector v(c.size());
          for (int k = 0; k < c.size(); ++k) v[k] = a[k] * omega[k] * std::cos(omega[k] * t + phase[k]);
          return v;
        };
        const HistoryWindow window = window_from_trajectory(x, xdot, 0.0, tau + 2.0, dt, tau);
        for (int k = 0; k < 3; ++k) {
          const double t = tau + 0.5 + 0.5 * k;
          const RateCheck rc = check_rate(spec, window, t, 1e-5);
          const double scale = std::abs(rc.finite_difference);
          const bool ok = scale >= 1e-3 ? rc.rel_error <= 1e-3 : rc.abs_error <= 1e-6;
          ++checked;
          if (!ok) {
            return SuiteFailure{
                "finite_difference",
                fmt::format("finite-difference mismatch for '{}' at t = {}: assembled {:.10g}, "
                            "central difference {:.10g}",
                            label, t, rc.assembled, rc.finite_difference),
                {{"seed", options_.seed}, {"spec", label}, {"trial", trial}, {"t", t},
                 {"assembled", rc.assembled}, {"finite_difference", rc.finite_difference}}};
          }
        }
      }
    }
    out_ << fmt::format("finite_difference: {} evaluations pass\n", checked);
    return std::nullopt;
  }

  std::optional<SuiteFailure> by_parts() {
    const Scenario s = build("case3");
    int checked = 0;
    for (double dt : {1e-2, 5e-3, 2.5e-3}) {
      const HistoryWindow window = window_from_trajectory(
          [](double t) { return Vector(Vector::Constant(1, 0.5 + 0.3 * std::sin(1.3 * t))); },
          [](double t) { return Vector(Vector::Constant(1, 0.39 * std::cos(1.3 * t))); }, 0.0, 3.0, dt, 1.0);
      for (double t : {1.5, 2.0, 2.5}) {
        const ByPartsCheck bp = check_by_parts(*s.cbfal, StateView::committed(window, t));
        const double error = std::abs(bp.quadrature - bp.by_parts);
        ++checked;
        if (!(error <= dt * dt)) {
          return SuiteFailure{"by_parts", fmt::format("dt = {}, t = {}: |difference| = {:.3g} > dt^2", dt, t, error),
                              {{"dt", dt}, {"t", t}, {"quadrature", bp.quadrature}, {"by_parts", bp.by_parts}}};
        }
      }
    }
    out_ << fmt::format("by_parts: {} evaluations pass\n", checked);
    return std::nullopt;
  }

  std::optional<SuiteFailure> class_ke() {
    std::mt19937_64 rng(options_.seed + 7);
    std::uniform_real_distribution<double> slope(0.01, 100.0);
    for (int i = 0; i < 16; ++i) {
      const double g = slope(rng);
      try {
        ClassKeFn::linear(g).validate();
      } catch (const std::exception& e) {
        return SuiteFailure{"class_ke", fmt::format("linear({}) rejected: {}", g, e.what()), {{"gamma", g}}};
      }
    }
    try {
      (void)ClassKeFn::custom([](double r) { return r * r * r + r; }, [](double r) { return 3 * r * r + 1; });
    } catch (const std::exception& e) {
      return SuiteFailure{"class_ke", fmt::format("r^3 + r rejected: {}", e.what()), {}};
    }
    const std::vector<std::pair<std::string, std::function<double(double)>>> invalid{
        {"-r", [](double r) { return -r; }},
        {"r^2", [](double r) { return r * r; }},
        {"r + 1", [](double r) { return r + 1.0; }}};
    for (const auto& [label, f] : invalid) {
      bool rejected = false;
      try {
        (void)ClassKeFn::custom(f, [](double) { return 1.0; });
      } catch (const std::invalid_argument&) {
        rejected = true;
      }
      if (!rejected) return SuiteFailure{"class_ke", fmt::format("'{}' accepted as class-K_e", label), {}};
    }
    out_ << "class_ke: invariants hold\n";
    return std::nullopt;
  }

 private:
  struct Entry {
    std::string label;
    CbfalSpec spec;
    bool positive;  // needs positive state samples
  };

  std::vector<Entry> registered_specs() const {
    std::vector<Entry> entries;
    auto add = [&](const std::string& label, CbfalSpec spec, bool positive) {
      if (spec.w0 && options_.corrupt_w0 != 1.0) {
        spec.w0 = [w0 = *spec.w0, k = options_.corrupt_w0](const StateView& v) { return RowVector(k * w0(v)); };
      }
      entries.push_back({label, std::move(spec), positive});
    };
    for (const std::string& name : scenario_names()) {
      const Scenario s = build(name);
      const bool positive = name == "predator_prey";
      add(name, *s.cbfal, positive);
      if (s.cbfal->lie_derivative) add(name + ".rate", *s.cbfal->lie_derivative, positive);
    }
    return entries;
  }

  const VerifyOptions& options_;
  std::ostream& out_;
};

}  // namespace

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  if (options.cases <= 0) {
    err << "warning: --cases 0 selects an empty suite; nothing verified\n";
    return kOk;
  }
  Suites suites(options, out);
  for (auto suite : {&Suites::kkt, &Suites::finite_differences, &Suites::by_parts, &Suites::class_ke}) {
    if (auto failure = (suites.*suite)()) {
      err << fmt::format("FAIL {}: {}\n", failure->suite, failure->detail);
      out << "replay: " << failure->replay.dump() << "\n";
      return kVerifyFailure;
    }
  }
  out << "verify: all suites pass\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// convergence

std::vector<ConvergenceRow> convergence_study(const std::string& scenario, std::vector<double> dts,
                                              const ParameterMap& overrides) {
  if (dts.size() < 3) throw std::invalid_argument("convergence needs at least three dt values");
  std::sort(dts.begin(), dts.end(), std::greater<>());
  std::vector<ConvergenceRow> rows;
  for (double dt : dts) {
    ParameterMap params = overrides;
    params["dt"] = dt;
    const Scenario s = build(scenario, params);
    if (s.expected_invalid) throw std::invalid_argument(scenario + " cannot be simulated");
    const Trajectory traj = simulate(s.plant, s.filter, s.initial, s.sim, s.filter ? nullptr : s.cbfal.get());
    rows.push_back({dt, traj.records.back().x, 0.0, std::nan("")});
  }
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    rows[i].difference = (rows[i].terminal - rows[i + 1].terminal).lpNorm<Eigen::Infinity>();
  }
  for (std::size_t i = 0; i + 2 < rows.size(); ++i) {
    const double ratio = rows[i].dt / rows[i + 1].dt;
    if (rows[i + 1].difference > 0.0 && rows[i].difference > 0.0) {
      rows[i].order = std::log(rows[i].difference / rows[i + 1].difference) / std::log(ratio);
    }
  }
  return rows;
}

int cmd_convergence(const std::string& scenario, const std::vector<double>& dts,
                    const ParameterMap& overrides, std::ostream& out, std::ostream& err) {
  std::vector<ConvergenceRow> rows;
  try {
    rows = convergence_study(scenario, dts, overrides);
  } catch (const UnknownScenario& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidOverride& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NonFiniteState& e) {
    err << "error: " << e.what() << "\n";
    return kUnsafeAbort;
  } catch (const DegenerateConstraint& e) {
    err << "error: " << e.what() << "\n";
    return kUnsafeAbort;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  out << fmt::format("{:>12} {:>24} {:>14} {:>8}\n", "dt", "x_0(t_end)", "difference", "order");
  for (const ConvergenceRow& r : rows) {
    out << fmt::format("{:>12.6g} {:>24.17g} {:>14.6e} {:>8}\n", r.dt, r.terminal[0], r.difference,
                       std::isnan(r.order) ? std::string("-") : fmt::format("{:.3f}", r.order));
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// batch

int cmd_batch(const std::vector<RunOptions>& runs, int jobs, std::ostream& out, std::ostream& err) {
  struct Result {
    int code = 0;
    std::string out, err;
  };
  std::vector<Result> results(runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      std::ostringstream o, e;
      results[i].code = cmd_run(runs[i], o, e);
      results[i].out = o.str();
      results[i].err = e.str();
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  int code = kOk;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out << results[i].out;
    err << results[i].err;
    out << fmt::format("== {}: exit {}\n", runs[i].config.scenario, results[i].code);
    code = std::max(code, results[i].code);
  }
  return code;
}

// ---------------------------------------------------------------------------
// entry point

namespace {

ParameterMap parse_sets(const std::vector<std::string>& sets) {
  ParameterMap map;
  for (const std::string& s : sets) {
    const auto [key, value] = parse_override(s);
    map[key] = value;
  }
  return map;
}

ReportFormat parse_format(const std::string& text) {
  if (text == "structured") return ReportFormat::structured;
  if (text == "text") return ReportFormat::text;
  throw InvalidOverride(fmt::format("report format must be text or structured, got '{}'", text));
}

}  // namespace

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Safety filters for time-delay systems built on control barrier functionals"};
  app.require_subcommand(1);

  std::string scenario, out_dir, report_format, config_file;
  std::vector<std::string> sets;
  double dt = 0.0, t_end = 0.0;
  bool gnuplot = false;

  auto* run_cmd = app.add_subcommand("run", "simulate one scenario and check it");
  run_cmd->add_option("--scenario", scenario, "scenario name");
  run_cmd->add_option("--set", sets, "parameter override key=value (repeatable)");
  run_cmd->add_option("--dt", dt, "step size");
  run_cmd->add_option("--t-end", t_end, "horizon");
  run_cmd->add_option("--out", out_dir, "output directory");
  run_cmd->add_option("--report", report_format, "text or structured");
  run_cmd->add_option("--config", config_file, "INI file with [run] and [overrides]");
  run_cmd->add_flag("--gnuplot-script", gnuplot, "also write <scenario>.gp");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "run the oracle and property suites");
  verify_cmd->add_option("--seed", verify.seed, "random seed");
  verify_cmd->add_option("--cases", verify.cases, "randomized filter cases");
  verify_cmd->add_option("--corrupt-w0", verify.corrupt_w0, "scale present-state weights (fault injection)");

  std::vector<double> dts;
  auto* conv_cmd = app.add_subcommand("convergence", "terminal-state differences under dt refinement");
  conv_cmd->add_option("--scenario", scenario, "scenario name")->required();
  conv_cmd->add_option("--dt", dts, "comma-separated dt values")->delimiter(',')->required();
  conv_cmd->add_option("--set", sets, "parameter override key=value (repeatable)");
  conv_cmd->add_option("--t-end", t_end, "horizon");

  std::vector<std::string> batch_names;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* batch_cmd = app.add_subcommand("batch", "run several scenarios in parallel");
  batch_cmd->add_option("--scenarios", batch_names, "comma-separated names (default: all)")->delimiter(',');
  batch_cmd->add_option("--set", sets, "override applied to every scenario");
  batch_cmd->add_option("--dt", dt, "step size");
  batch_cmd->add_option("--t-end", t_end, "horizon");
  batch_cmd->add_option("--out", out_dir, "output directory");
  batch_cmd->add_option("--report", report_format, "text or structured");
  batch_cmd->add_option("--jobs", jobs, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run_cmd || *batch_cmd) {
      RunOptions base;
      if (!config_file.empty()) base.config = read_config_file(config_file);
      if (!scenario.empty()) base.config.scenario = scenario;
      for (const auto& [k, v] : parse_sets(sets)) base.config.overrides[k] = v;
      if (dt > 0.0) base.config.dt = dt;
      if (t_end > 0.0) base.config.t_end = t_end;
      if (!out_dir.empty()) base.config.out_dir = out_dir;
      if (!report_format.empty()) base.config.report = parse_format(report_format);
      base.gnuplot_script = gnuplot;
      if (*run_cmd) {
        if (base.config.scenario.empty()) throw InvalidOverride("run needs --scenario or a config file naming one");
        return cmd_run(base, out, err);
      }
      std::vector<RunOptions> runs;
      for (const std::string& name : batch_names.empty() ? scenario_names() : batch_names) {
        RunOptions r = base;
        r.config.scenario = name;
        runs.push_back(r);
      }
      return cmd_batch(runs, jobs, out, err);
    }
    if (*verify_cmd) return cmd_verify(verify, out, err);
    ParameterMap overrides = parse_sets(sets);
    if (t_end > 0.0) overrides["t_end"] = t_end;
    return cmd_convergence(scenario, dts, overrides, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace cbfal::cli
