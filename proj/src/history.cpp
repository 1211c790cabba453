#include "cbfal/history.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace cbfal {

InitialHistory InitialHistory::constant(const Vector& value) {
  const Vector zero = Vector::Zero(value.size());
  return {[value](double) { return value; }, [zero](double) { return zero; }};
}

HistoryWindow::HistoryWindow(double max_lag, InterpOrder order) : max_lag_(max_lag), order_(order) {
  if (!(max_lag > 0.0)) throw std::invalid_argument("history window needs max_lag > 0");
}

void HistoryWindow::append(double t, const Vector& x, const Vector& xdot) {
  if (x.size() != xdot.size()) throw std::invalid_argument("state/derivative size mismatch");
  if (samples_.empty()) {
    dim_ = static_cast<int>(x.size());
  } else {
    if (x.size() != dim_) throw std::invalid_argument("state dimension changed");
    if (!(t > samples_.back().t)) {
      throw NonMonotoneTime(fmt::format("sample time {:.17g} does not exceed last time {:.17g}", t,
                                        samples_.back().t));
    }
  }
  samples_.push_back({t, x, xdot});
  if (retain_all_) return;
  const double horizon = t - max_lag_;
  const double tol = 1e-9 * (samples_.size() > 1 ? t - samples_[samples_.size() - 2].t : 1.0);
  while (samples_.size() > 2 && samples_[1].t <= horizon + tol) samples_.pop_front();
}

void HistoryWindow::attach_initial(InitialHistory initial, double initial_time) {
  initial_ = std::move(initial);
  initial_time_ = initial_time;
}

void HistoryWindow::replace_back_derivative(const Vector& xdot) {
  if (samples_.empty()) throw std::logic_error("no sample to update");
  if (xdot.size() != dim_) throw std::invalid_argument("derivative dimension mismatch");
  samples_.back().xdot = xdot;
}

double HistoryWindow::snap_tolerance(std::size_t i) const {
  double spacing = 0.0;
  if (i + 1 < samples_.size()) spacing = samples_[i + 1].t - samples_[i].t;
  else if (i > 0) spacing = samples_[i].t - samples_[i - 1].t;
  if (spacing <= 0.0) spacing = std::max(1.0, std::abs(samples_[i].t));
  return 1e-9 * spacing;
}

bool HistoryWindow::covered_by_initial(double time) const {
  if (!initial_) return false;
  const double tol = samples_.empty() ? 1e-12 : snap_tolerance(0);
  return time < initial_time_ - tol && time >= initial_time_ - max_lag_ - tol;
}

double HistoryWindow::earliest_time() const {
  double earliest = samples_.empty() ? std::numeric_limits<double>::infinity() : front_time();
  if (initial_) earliest = std::min(earliest, initial_time_ - max_lag_);
  return earliest;
}

std::optional<std::size_t> HistoryWindow::bracket(double time) const {
  if (samples_.empty()) return std::nullopt;
  auto it = std::upper_bound(samples_.begin(), samples_.end(), time,
                             [](double value, const Sample& s) { return value < s.t; });
  if (it == samples_.begin()) {
    if (samples_.front().t - time <= snap_tolerance(0)) return 0;
    return std::nullopt;
  }
  auto i = static_cast<std::size_t>(std::distance(samples_.begin(), it)) - 1;
  if (i + 1 < samples_.size() && samples_[i + 1].t - time <= snap_tolerance(i + 1)) ++i;
  return i;
}

std::optional<std::size_t> HistoryWindow::find_sample(double time) const {
  const auto i = bracket(time);
  if (i && std::abs(samples_[*i].t - time) <= snap_tolerance(*i)) return i;
  return std::nullopt;
}

namespace {

[[noreturn]] void outside(double time, const HistoryWindow& w) {
  throw QueryOutsideSpan(fmt::format("history query at t={:.17g} outside [{:.17g}, {:.17g}]", time,
                                     w.empty() ? 0.0 : w.earliest_time(),
                                     w.empty() ? 0.0 : w.back_time()));
}

}  // namespace

Vector HistoryWindow::state_at(double time) const {
  if (covered_by_initial(time)) return initial_->state(time - initial_time_);
  const auto idx = bracket(time);
  if (!idx) outside(time, *this);
  const std::size_t i = *idx;
  const Sample& a = samples_[i];
  if (std::abs(time - a.t) <= snap_tolerance(i)) return a.x;
  if (i + 1 >= samples_.size()) outside(time, *this);
  const Sample& b = samples_[i + 1];
  const double h = b.t - a.t;
  const double s = (time - a.t) / h;
  if (order_ == InterpOrder::linear) return (1.0 - s) * a.x + s * b.x;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * a.x + (s3 - 2 * s2 + s) * h * a.xdot + (-2 * s3 + 3 * s2) * b.x +
         (s3 - s2) * h * b.xdot;
}

Vector HistoryWindow::derivative_at(double time) const {
  if (covered_by_initial(time)) return initial_->derivative(time - initial_time_);
  const auto idx = bracket(time);
  if (!idx) outside(time, *this);
  const std::size_t i = *idx;
  const Sample& a = samples_[i];
  if (std::abs(time - a.t) <= snap_tolerance(i)) return a.xdot;
  if (i + 1 >= samples_.size()) outside(time, *this);
  const Sample& b = samples_[i + 1];
  const double s = (time - a.t) / (b.t - a.t);
  return (1.0 - s) * a.xdot + s * b.xdot;
}

Vector HistoryWindow::eval_state(double t, double lag) const {
  if (lag < 0.0 || lag > max_lag_ * (1 + 1e-12)) outside(t - lag, *this);
  return state_at(t - lag);
}

Vector HistoryWindow::eval_derivative(double t, double lag) const {
  if (lag < 0.0 || lag > max_lag_ * (1 + 1e-12)) outside(t - lag, *this);
  return derivative_at(t - lag);
}

void HistoryWindow::write_csv(std::ostream& out) const {
  out << "t";
  for (int i = 0; i < dim_; ++i) out << ",x_" << i;
  for (int i = 0; i < dim_; ++i) out << ",xdot_" << i;
  out << '\n';
  for (const Sample& s : samples_) {
    out << fmt::format("{:.17g}", s.t);
    for (int i = 0; i < dim_; ++i) out << fmt::format(",{:.17g}", s.x[i]);
    for (int i = 0; i < dim_; ++i) out << fmt::format(",{:.17g}", s.xdot[i]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

StateView::StateView(const HistoryWindow& window, double t, const Vector& x_now, bool committed)
    : window_(&window), t_(t), x_now_(x_now), committed_(committed), gap_start_(t) {}

StateView StateView::committed(const HistoryWindow& window, double t) {
  if (window.empty()) throw QueryOutsideSpan("empty history window");
  return StateView(window, t, window.state_at(t), true);
}

StateView StateView::provisional(const HistoryWindow& window, double t, const Vector& x_now) {
  if (window.empty()) throw QueryOutsideSpan("provisional view needs at least one committed sample");
  StateView view(window, t, x_now, false);
  const Sample& last = window.back();
  const double h = t - last.t;
  if (h > 1e-12 * std::max(1.0, std::abs(t))) {
    view.gap_start_ = last.t;
    view.gap_x_ = last.x;
    view.gap_xdot_ = last.xdot;
    view.gap_curv_ = (x_now - last.x - h * last.xdot) / (h * h);
  } else if (h < -1e-12 * std::max(1.0, std::abs(t))) {
    throw QueryOutsideSpan(
        fmt::format("provisional view at t={:.17g} precedes last sample {:.17g}", t, last.t));
  }
  return view;
}

Vector StateView::x(double theta) const {
  if (theta == 0.0) return x_now_;
  const double s = t_ + theta;
  if (!committed_ && s > gap_start_ && gap_start_ < t_) {
    const double d = s - gap_start_;
    return gap_x_ + d * gap_xdot_ + (d * d) * gap_curv_;
  }
  return window_->state_at(s);
}

Vector StateView::xdot(double theta) const {
  const double s = t_ + theta;
  if (!committed_) {
    if (gap_start_ < t_ && (s > gap_start_ || theta == 0.0)) {
      return gap_xdot_ + (2.0 * (s - gap_start_)) * gap_curv_;
    }
    if (theta == 0.0) return window_->back().xdot;
  }
  try {
    return window_->derivative_at(s);
  } catch (const QueryOutsideSpan& e) {
    throw MissingDerivativeHistory(e.what());
  }
}

// ---------------------------------------------------------------------------

HistoryWindow window_from_initial(const InitialHistory& initial, double max_lag, double dt,
                                  InterpOrder order) {
  HistoryWindow window(max_lag, order);
  window.set_retain_all(true);
  window.attach_initial(initial, 0.0);
  const auto k = static_cast<long>(std::ceil(max_lag / dt - 1e-9));
  for (long i = k; i >= 0; --i) {
    const double theta = -static_cast<double>(i) * dt;
    window.append(theta, initial.state(theta), initial.derivative(theta));
  }
  return window;
}

HistoryWindow window_from_trajectory(const std::function<Vector(double)>& x,
                                     const std::function<Vector(double)>& xdot, double t_begin,
                                     double t_end, double dt, double max_lag, InterpOrder order) {
  HistoryWindow window(max_lag, order);
  window.set_retain_all(true);
  const auto steps = static_cast<long>(std::llround((t_end - t_begin) / dt));
  for (long i = 0; i <= steps; ++i) {
    const double t = t_begin + static_cast<double>(i) * dt;
    window.append(t, x(t), xdot(t));
  }
  return window;
}

}  // namespace cbfal
