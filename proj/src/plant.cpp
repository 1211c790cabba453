#include "cbfal/plant.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace cbfal {

void ControlAffinePlant::validate() const {
  if (n < 1 || n > kMaxDim || m < 1 || m > kMaxDim) {
    throw std::invalid_argument(fmt::format("{}: dimensions n={}, m={} outside [1, {}]", name, n, m, kMaxDim));
  }
  if (!(max_lag > 0.0)) throw std::invalid_argument(name + ": max_lag must be positive");
  if (!drift || !input) throw std::invalid_argument(name + ": drift and input maps required");
}

}  // namespace cbfal
