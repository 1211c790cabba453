#pragma once

#include "cbfal/common.hpp"

#include <cstddef>
#include <vector>
#include <functional>
#include <iosfwd>
#include <optional>

namespace cbfal {

enum class InterpOrder { linear, cubic_hermite };

/// Initial data x_0 on [-tau, 0] and its derivative on [-tau, 0).
///
/// The state function must be continuous. The derivative function may have
/// finitely many jumps and is read with the right-hand convention.
struct InitialHistory {
  std::function<Vector(double theta)> state;
  std::function<Vector(double theta)> derivative;

  /// x_0(theta) = value, xdot_0(theta) = 0.
  static InitialHistory constant(const Vector& value);
};

struct Sample {
  double t;
  Vector x;
  Vector xdot;
};

/// Contiguous FIFO of samples with amortised O(1) pop_front.
class SampleBuffer {
 public:
  using const_iterator = std::vector<Sample>::const_iterator;

  bool empty() const { return head_ == data_.size(); }
  std::size_t size() const { return data_.size() - head_; }
  const Sample& operator[](std::size_t i) const { return data_[head_ + i]; }
  const Sample& front() const { return data_[head_]; }
  const Sample& back() const { return data_.back(); }
  Sample& back() { return data_.back(); }
  const_iterator begin() const { return data_.begin() + static_cast<std::ptrdiff_t>(head_); }
  const_iterator end() const { return data_.end(); }

  void push_back(Sample s) { data_.push_back(std::move(s)); }
  void pop_front() {
    ++head_;
    if (head_ > 4096 && 2 * head_ > data_.size()) {
      data_.erase(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(head_));
      head_ = 0;
    }
  }

 private:
  std::vector<Sample> data_;
  std::size_t head_ = 0;
};

/// Dense record of (t, x, xdot) samples covering [t - max_lag, t].
///
/// State queries between samples use cubic Hermite (or linear) interpolation
/// of the stored (x, xdot) pairs. Derivative queries read the stored
/// derivative channel directly and are right-continuous at sample times; the
/// state interpolant is never differenced.
///
/// When an InitialHistory is attached, queries at times before `initial_time`
/// go to the user functions instead of the interpolant.
class HistoryWindow {
 public:
  explicit HistoryWindow(double max_lag, InterpOrder order = InterpOrder::cubic_hermite);

  /// Appends a sample. Samples older than the last one at or before
  /// t - max_lag are discarded unless `retain_all` is set.
  void append(double t, const Vector& x, const Vector& xdot);

  void attach_initial(InitialHistory initial, double initial_time = 0.0);

  /// Overwrites the derivative stored with the newest sample.
  void replace_back_derivative(const Vector& xdot);

  /// x(t - lag).
  Vector eval_state(double t, double lag) const;
  /// xdot(t - lag), right-hand value at stored jumps.
  Vector eval_derivative(double t, double lag) const;

  Vector state_at(double time) const;
  Vector derivative_at(double time) const;

  /// Index of the sample at `time` if one lies within snapping tolerance.
  std::optional<std::size_t> find_sample(double time) const;

  void set_retain_all(bool retain) { retain_all_ = retain; }
  bool retain_all() const { return retain_all_; }

  double max_lag() const { return max_lag_; }
  InterpOrder order() const { return order_; }
  int dim() const { return dim_; }
  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }
  double front_time() const { return samples_.front().t; }
  double back_time() const { return samples_.back().t; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const Sample& back() const { return samples_.back(); }
  const SampleBuffer& samples() const { return samples_; }

  /// Earliest time a query may reach, accounting for attached initial data.
  double earliest_time() const;

  /// Index of the last sample with t <= time (after snapping), or nullopt
  /// when time precedes the first sample.
  std::optional<std::size_t> bracket(double time) const;

  /// Writes `t,x_0..x_{n-1},xdot_0..xdot_{n-1}` with 17 significant digits.
  void write_csv(std::ostream& out) const;

 private:
  bool covered_by_initial(double time) const;
  double snap_tolerance(std::size_t i) const;

  double max_lag_;
  InterpOrder order_;
  int dim_ = 0;
  bool retain_all_ = false;
  SampleBuffer samples_;
  std::optional<InitialHistory> initial_;
  double initial_time_ = 0.0;
};

/// The state function x_t and its derivative at a given time, as seen by a
/// functional. theta ranges over [-max_lag, 0].
///
/// A view is either committed (its time lies within the recorded window) or
/// provisional: it carries a trial state x(t) for a time past the last
/// sample, as happens at Runge-Kutta stages. In the provisional gap between
/// the last sample and t the state follows the quadratic that matches the
/// last sample's value and slope and reaches the trial state at t.
class StateView {
 public:
  static StateView committed(const HistoryWindow& window, double t);
  static StateView provisional(const HistoryWindow& window, double t, const Vector& x_now);

  double time() const { return t_; }
  const HistoryWindow& window() const { return *window_; }
  double max_lag() const { return window_->max_lag(); }
  int dim() const { return static_cast<int>(x_now_.size()); }
  bool is_committed() const { return committed_; }

  /// x_t(theta).
  Vector x(double theta = 0.0) const;
  /// xdot_t(theta). At theta = 0 on a provisional view this is the left limit
  /// of the gap interpolant, since the right-hand value depends on u(t).
  Vector xdot(double theta) const;

  /// Time of the last committed sample the view may read.
  double last_committed_time() const { return gap_start_; }

 private:
  StateView(const HistoryWindow& window, double t, const Vector& x_now, bool committed);

  const HistoryWindow* window_;
  double t_;
  Vector x_now_;
  bool committed_;
  double gap_start_;
  Vector gap_x_;
  Vector gap_xdot_;
  Vector gap_curv_;
};

/// Fills a window with the initial data sampled on the grid -k*dt, ..., -dt,
/// 0 (derivative at 0 taken from `derivative_at_zero`, or from the initial
/// derivative function when omitted). Used for probing and tests.
HistoryWindow window_from_initial(const InitialHistory& initial, double max_lag, double dt,
                                  InterpOrder order = InterpOrder::cubic_hermite);

/// Samples a smooth trajectory x(t), xdot(t) on [t_begin, t_end] with step dt
/// into a window that retains everything.
HistoryWindow window_from_trajectory(const std::function<Vector(double)>& x,
                                     const std::function<Vector(double)>& xdot, double t_begin,
                                     double t_end, double dt, double max_lag,
                                     InterpOrder order = InterpOrder::cubic_hermite);

}  // namespace cbfal
