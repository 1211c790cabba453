#pragma once

#include "cbfal/safety_filter.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace cbfal {

struct SimConfig {
  double dt = 1e-3;
  double t_end = 50.0;
  int record_stride = 1;
  /// Before this time u = 0; from the first grid time at or after it the
  /// filter runs.
  double controller_on_at = 0.0;
  InterpOrder interp = InterpOrder::cubic_hermite;
  /// Keep every committed sample so the trajectory can be re-queried.
  bool retain_history = true;

  /// Throws std::invalid_argument unless dt > 0, t_end > 0 and every lag in
  /// `lags` is a positive integer multiple of dt within 1e-12 relative.
  void validate(const std::vector<double>& lags) const;
};

struct SimRecord {
  double t = 0.0;
  Vector x;
  Vector u;
  std::optional<double> barrier;           // H, when a functional is attached
  std::optional<double> extended_barrier;  // He, extended mode only
  std::optional<double> phi;               // only while the filter runs
  bool active = false;
};

struct Trajectory {
  std::string plant_name;
  int n = 0;
  int m = 0;
  double dt = 0.0;
  double controller_on_at = 0.0;
  bool completed = false;
  std::vector<SimRecord> records;
  HistoryWindow history{1.0};
  /// Evaluates phi on a view of `history`; empty without a filter.
  std::function<double(const StateView&)> switching;
  /// Evaluates H on a view of `history`; empty without a functional.
  std::function<double(const StateView&)> barrier;

  double final_time() const { return records.empty() ? 0.0 : records.back().t; }
};

/// A state component became NaN or infinite. Carries the committed part of
/// the run.
class NonFiniteState : public Error {
 public:
  NonFiniteState(const std::string& what, double t, std::shared_ptr<const Trajectory> partial)
      : Error(what), t_(t), partial_(std::move(partial)) {}
  double time() const { return t_; }
  const Trajectory& partial() const { return *partial_; }

 private:
  double t_;
  std::shared_ptr<const Trajectory> partial_;
};

/// DegenerateConstraint raised inside a simulation, with the committed part
/// of the run.
class DegenerateDuringRun : public DegenerateConstraint {
 public:
  DegenerateDuringRun(const DegenerateConstraint& cause, double t,
                      std::shared_ptr<const Trajectory> partial)
      : DegenerateConstraint(cause.what(), cause.phi(), cause.phi0_norm()), t_(t),
        partial_(std::move(partial)) {}
  double time() const { return t_; }
  const Trajectory& partial() const { return *partial_; }

 private:
  double t_;
  std::shared_ptr<const Trajectory> partial_;
};

/// Fixed-step RK4 on the grid t_n = n dt.
///
/// Stage evaluations read delayed values from committed history and the
/// present value from the stage state. Each accepted step commits
/// (t, x, xdot) with xdot the closed-loop right-hand side at the new state,
/// which is also the first stage of the next step. `monitor` supplies H for
/// runs without a filter.
Trajectory simulate(const ControlAffinePlant& plant, const std::optional<FilterSpec>& filter_spec,
                    const InitialHistory& initial, const SimConfig& cfg,
                    const CbfalSpec* monitor = nullptr);

struct SwitchEvent {
  double t;
  int direction;  // -1: phi falls below zero (filter engages), +1: rises
};

/// Sign changes of the recorded phi, refined by bisection on the stored
/// history until |phi| <= 1e-9.
std::vector<SwitchEvent> locate_switch(const Trajectory& trajectory);

/// `t,x_0..,u_0..,H,He,phi,active` with 17 significant digits; missing
/// values are left empty.
void write_csv(const Trajectory& trajectory, std::ostream& out);

}  // namespace cbfal
