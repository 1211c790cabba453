#include "cbfal/integrator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cbfal {

void SimConfig::validate(const std::vector<double>& lags) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be positive");
  if (record_stride < 1) throw std::invalid_argument("record_stride must be at least 1");
  if (!std::isfinite(controller_on_at)) throw std::invalid_argument("controller_on_at must be finite");
  for (double lag : lags) {
    const double ratio = lag / dt;
    const double k = std::round(ratio);
    if (k < 1.0 || std::abs(ratio - k) > 1e-12 * ratio) {
      throw std::invalid_argument(
          fmt::format("lag {} is not a positive integer multiple of dt = {}", lag, dt));
    }
  }
}

namespace {

struct StepEval {
  Vector rhs;
  Vector u;
  std::optional<FilterResult> filtered;
};

struct ClosedLoop {
  const ControlAffinePlant& plant;
  const std::optional<FilterSpec>& spec;

  StepEval operator()(const StateView& view, bool controller_on) const {
    StepEval e;
    if (spec && controller_on) {
      e.filtered = filter(*spec, plant, view);
      e.u = e.filtered->u;
    } else {
      e.u = Vector::Zero(plant.m);
    }
    e.rhs = plant.rhs(view, e.u);
    return e;
  }
};

void collect_lags(const CbfalSpec& spec, std::vector<double>& lags) {
  lags.push_back(spec.max_lag);
  for (const PointWeight& p : spec.point_weights) lags.push_back(p.lag);
  if (spec.lie_derivative) collect_lags(*spec.lie_derivative, lags);
}

bool same(const Vector& a, const Vector& b) {
  return (a - b).lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, a.lpNorm<Eigen::Infinity>());
}

}  // namespace

Trajectory simulate(const ControlAffinePlant& plant, const std::optional<FilterSpec>& filter_spec,
                    const InitialHistory& initial, const SimConfig& cfg, const CbfalSpec* monitor) {
  plant.validate();
  if (filter_spec) filter_spec->validate();
  if (!initial.state || !initial.derivative) throw std::invalid_argument("initial history incomplete");

  std::vector<double> lags{plant.max_lag};
  if (filter_spec) collect_lags(*filter_spec->cbfal, lags);
  if (monitor) collect_lags(*monitor, lags);
  cfg.validate(lags);
  const double max_lag = *std::max_element(lags.begin(), lags.end());
  const double dt = cfg.dt;

  auto traj = std::make_shared<Trajectory>();
  traj->plant_name = plant.name;
  traj->n = plant.n;
  traj->m = plant.m;
  traj->dt = dt;
  traj->controller_on_at = cfg.controller_on_at;
  traj->history = HistoryWindow(max_lag, cfg.interp);
  HistoryWindow& history = traj->history;
  history.set_retain_all(cfg.retain_history);
  history.attach_initial(initial, 0.0);
  if (filter_spec) {
    traj->switching = [spec = *filter_spec, plant](const StateView& view) {
      return switching_surface(spec, plant, view);
    };
    traj->barrier = [cbfal = filter_spec->cbfal](const StateView& view) { return cbfal->value(view); };
  } else if (monitor) {
    traj->barrier = [spec = *monitor](const StateView& view) { return spec.value(view); };
  }

  const auto lag_steps = std::llround(max_lag / dt);
  for (long long i = lag_steps; i >= 1; --i) {
    const double theta = -static_cast<double>(i) * dt;
    history.append(theta, initial.state(theta), initial.derivative(theta));
  }

  const long long on_step = static_cast<long long>(std::ceil(cfg.controller_on_at / dt - 1e-9));
  const long long steps = std::llround(cfg.t_end / dt);
  const ClosedLoop loop{plant, filter_spec};
  auto time_of = [dt](long long n) { return static_cast<double>(n) * dt; };

  auto fail_non_finite = [&](double t, const char* where) {
    throw NonFiniteState(fmt::format("non-finite {} at t = {:.17g}", where, t), t,
                         std::make_shared<const Trajectory>(*traj));
  };

  // Commits x at step n and returns the closed-loop evaluation there. The
  // stored derivative is re-evaluated on the committed view until it agrees
  // with the right-hand side the view produces.
  auto commit = [&](long long n, const Vector& x) {
    const double t = time_of(n);
    const bool on = n >= on_step;
    try {
      StepEval e = loop(StateView::provisional(history, t, x), on);
      if (!e.rhs.allFinite()) fail_non_finite(t, "derivative");
      history.append(t, x, e.rhs);
      for (int pass = 0; pass < 8; ++pass) {
        StepEval again = loop(StateView::committed(history, t), on);
        const bool settled = same(again.rhs, e.rhs);
        e = std::move(again);
        history.replace_back_derivative(e.rhs);
        if (settled) break;
      }
      if (!e.rhs.allFinite()) fail_non_finite(t, "derivative");
      return e;
    } catch (const DegenerateDuringRun&) {
      throw;
    } catch (const DegenerateConstraint& cause) {
      throw DegenerateDuringRun(cause, t, std::make_shared<const Trajectory>(*traj));
    }
  };

  auto record = [&](long long n, const Vector& x, const StepEval& e) {
    SimRecord r;
    r.t = time_of(n);
    r.x = x;
    r.u = e.u;
    if (e.filtered) {
      r.barrier = e.filtered->barrier;
      r.extended_barrier = e.filtered->extended_barrier;
      r.phi = e.filtered->phi;
      r.active = e.filtered->active;
    } else if (filter_spec || monitor) {
      const StateView view = StateView::committed(history, r.t);
      r.barrier = traj->barrier(view);
      if (filter_spec && filter_spec->extended) r.extended_barrier = filter_spec->extended->value(view);
    }
    traj->records.push_back(std::move(r));
  };

  Vector x = initial.state(0.0);
  if (x.size() != plant.n) throw std::invalid_argument("initial state has wrong dimension");
  StepEval current = commit(0, x);
  record(0, x, current);

  for (long long n = 0; n < steps; ++n) {
    const double t = time_of(n);
    const bool on = n >= on_step;
    Vector next;
    try {
      const Vector& k1 = current.rhs;
      const Vector x2 = x + (0.5 * dt) * k1;
      const Vector k2 = loop(StateView::provisional(history, t + 0.5 * dt, x2), on).rhs;
      const Vector x3 = x + (0.5 * dt) * k2;
      const Vector k3 = loop(StateView::provisional(history, t + 0.5 * dt, x3), on).rhs;
      const Vector x4 = x + dt * k3;
      const Vector k4 = loop(StateView::provisional(history, time_of(n + 1), x4), on).rhs;
      next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } catch (const DegenerateConstraint& cause) {
      throw DegenerateDuringRun(cause, t, std::make_shared<const Trajectory>(*traj));
    }
    if (!next.allFinite()) fail_non_finite(time_of(n + 1), "state");
    x = std::move(next);
    current = commit(n + 1, x);
    if ((n + 1) % cfg.record_stride == 0 || n + 1 == steps) record(n + 1, x, current);
  }
  traj->completed = true;
  return std::move(*traj);
}

std::vector<SwitchEvent> locate_switch(const Trajectory& trajectory) {
  std::vector<SwitchEvent> events;
  if (!trajectory.switching) return events;
  const auto& recs = trajectory.records;
  for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
    if (!recs[i].phi || !recs[i + 1].phi) continue;
    const bool lo_safe = *recs[i].phi >= 0.0;
    const bool hi_safe = *recs[i + 1].phi >= 0.0;
    if (lo_safe == hi_safe) continue;
    double lo = recs[i].t;
    double hi = recs[i + 1].t;
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
      mid = 0.5 * (lo + hi);
      double value;
      try {
        value = trajectory.switching(StateView::committed(trajectory.history, mid));
      } catch (const QueryOutsideSpan&) {
        // History was not retained: interpolate the recorded values instead.
        const double a = *recs[i].phi, b = *recs[i + 1].phi;
        mid = recs[i].t + (recs[i + 1].t - recs[i].t) * a / (a - b);
        break;
      }
      if (std::abs(value) <= 1e-9) break;
      if ((value >= 0.0) == lo_safe) lo = mid;
      else hi = mid;
      if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
    }
    events.push_back({mid, lo_safe ? -1 : +1});
  }
  return events;
}

void write_csv(const Trajectory& trajectory, std::ostream& out) {
  fmt::memory_buffer buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "t");
  for (int i = 0; i < trajectory.n; ++i) fmt::format_to(it, ",x_{}", i);
  for (int i = 0; i < trajectory.m; ++i) fmt::format_to(it, ",u_{}", i);
  fmt::format_to(it, ",H,He,phi,active\n");
  auto optional_cell = [&](const std::optional<double>& v) {
    if (v) fmt::format_to(it, ",{:.17g}", *v);
    else fmt::format_to(it, ",");
  };
  for (const SimRecord& r : trajectory.records) {
    fmt::format_to(it, "{:.17g}", r.t);
    for (int i = 0; i < r.x.size(); ++i) fmt::format_to(it, ",{:.17g}", r.x[i]);
    for (int i = 0; i < r.u.size(); ++i) fmt::format_to(it, ",{:.17g}", r.u[i]);
    optional_cell(r.barrier);
    optional_cell(r.extended_barrier);
    optional_cell(r.phi);
    fmt::format_to(it, ",{}\n", r.active ? 1 : 0);
    if (buf.size() > (1 << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace cbfal
