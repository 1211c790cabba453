#include "cbfal/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cbfal {

namespace {

bool same_length(double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(a, b); }

}  // namespace

std::vector<QuadNode> quadrature_nodes(const StateView& view, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("quadrature interval must satisfy lo < hi");
  const HistoryWindow& window = view.window();
  const double t = view.time();
  const double a = t + lo;
  const double b = t + hi;
  // Samples usable as nodes stop at the committed edge of the view.
  const double committed_edge = std::min(b, view.last_committed_time());
  const double merge = 1e-12 * std::max(1.0, std::abs(t));

  std::vector<QuadNode> nodes;
  auto add = [&](double time, long sample) {
    // Drop degenerate cells from snapping at the ends.
    if (!nodes.empty() && std::abs(time - t - nodes.back().theta) <= merge) return;
    nodes.push_back({time - t, 0.0, sample});
  };

  const auto first = window.find_sample(a);
  const auto snapped_b = window.find_sample(b);
  const auto start = window.bracket(a);
  std::size_t i = start ? *start + 1 : 0;
  const std::size_t stop = window.size();
  nodes.reserve((snapped_b ? *snapped_b : stop) - std::min(i, stop) + 16);
  add(a, first ? static_cast<long>(*first) : -1);
  for (; i < stop; ++i) {
    const double s = window[i].t;
    if (s <= a) continue;
    if (s > committed_edge) break;
    if (snapped_b && *snapped_b == i) break;
    add(s, static_cast<long>(i));
  }
  const bool b_on_sample = snapped_b && view.is_committed();
  add(b, b_on_sample ? static_cast<long>(*snapped_b) : -1);
  if (nodes.size() == 1) {
    // Interval shorter than the snapping tolerance.
    nodes.push_back({hi, 0.0, -1});
  }

  const std::size_t cells = nodes.size() - 1;
  std::size_t c = 0;
  while (c < cells) {
    const double h = nodes[c + 1].theta - nodes[c].theta;
    std::size_t run = 1;
    while (c + run < cells && same_length(nodes[c + run + 1].theta - nodes[c + run].theta, h)) ++run;
    if (run == 1) {
      const double mid = 0.5 * (nodes[c].theta + nodes[c + 1].theta);
      nodes[c].weight += h / 6.0;
      nodes[c + 1].weight += h / 6.0;
      nodes.push_back({mid, 4.0 * h / 6.0, -1});
    } else {
      const double step = (nodes[c + run].theta - nodes[c].theta) / static_cast<double>(run);
      std::size_t simpson = run % 2 == 0 ? run : run - 3;
      for (std::size_t k = 0; k < simpson; k += 2) {
        nodes[c + k].weight += step / 3.0;
        nodes[c + k + 1].weight += 4.0 * step / 3.0;
        nodes[c + k + 2].weight += step / 3.0;
      }
      if (simpson != run) {
        const std::size_t k = c + simpson;
        nodes[k].weight += 3.0 * step / 8.0;
        nodes[k + 1].weight += 9.0 * step / 8.0;
        nodes[k + 2].weight += 9.0 * step / 8.0;
        nodes[k + 3].weight += 3.0 * step / 8.0;
      }
    }
    c += run;
  }
  return nodes;
}

}  // namespace cbfal
