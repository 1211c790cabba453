#pragma once

#include "cbfal/history.hpp"

#include <functional>
#include <string>

namespace cbfal {

/// xdot(t) = F(x_t) + G(x_t) u(t), optionally neutral (F, G may read the
/// derivative history at strictly positive lags, never at lag 0).
struct ControlAffinePlant {
  std::string name;
  int n = 1;
  int m = 1;
  double max_lag = 1.0;
  bool neutral = false;
  std::function<Vector(const StateView&)> drift;  // F
  std::function<Matrix(const StateView&)> input;  // G, n x m

  Vector rhs(const StateView& view, const Vector& u) const { return drift(view) + input(view) * u; }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

}  // namespace cbfal
