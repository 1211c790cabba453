#pragma once

#include "cbfal/history.hpp"

#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

namespace cbfal {

/// A quadrature node in lag coordinates. `sample` indexes the window sample
/// the node sits on, or is -1 for nodes that need interpolation.
struct QuadNode {
  double theta;
  double weight;
  long sample;
};

/// x_t(theta) and xdot_t(theta) at a quadrature node. The references stay
/// valid only for the duration of the callback that receives the point.
struct HistoryPoint {
  double theta;
  const Vector& x;
  const Vector& xdot;
};

/// Nodes and weights for integrating over theta in [lo, hi] along the
/// view's sample grid.
///
/// Runs of equally spaced cells get composite Simpson (a 3/8 panel closes
/// odd runs); isolated cells, including the partial cells at the interval
/// ends and the provisional gap, get Simpson with an interpolated midpoint.
std::vector<QuadNode> quadrature_nodes(const StateView& view, double lo, double hi);

/// Calls f(node, point) for every node. Nodes on samples read the stored
/// values; the others interpolate through the view.
template <class F>
void visit_nodes(const StateView& view, const std::vector<QuadNode>& nodes, F&& f) {
  for (const QuadNode& node : nodes) {
    if (node.sample >= 0) {
      const Sample& s = view.window()[static_cast<std::size_t>(node.sample)];
      f(node, HistoryPoint{node.theta, s.x, s.xdot});
    } else {
      const Vector x = view.x(node.theta);
      const Vector xdot = view.xdot(node.theta);
      f(node, HistoryPoint{node.theta, x, xdot});
    }
  }
}

/// Integrates f(HistoryPoint) over theta in [lo, hi]. The integrand may
/// return a double or any Eigen vector type.
template <class F>
auto integrate(const StateView& view, double lo, double hi, F&& f) {
  using Result = std::decay_t<decltype(f(std::declval<const HistoryPoint&>()))>;
  const auto nodes = quadrature_nodes(view, lo, hi);
  std::optional<Result> total;
  visit_nodes(view, nodes, [&](const QuadNode& node, const HistoryPoint& p) {
    if (total) *total += node.weight * f(p);
    else total = Result(node.weight * f(p));
  });
  return *total;
}

}  // namespace cbfal
