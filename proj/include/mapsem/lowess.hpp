#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mapsem {

struct TimedValue {
  double t{0.0};
  double value{0.0};
};

/// Single-pass, degree-1 LOWESS with tricube weights. Each point is refit on
/// its floor(span_fraction * n) nearest neighbours (at least 2). Requires
/// strictly increasing t; throws Error(kEmptySeries) on empty input.
std::vector<TimedValue> lowess_smooth(std::span<const TimedValue> series, double span_fraction);

/// Same estimator with an explicit neighbour count.
std::vector<TimedValue> lowess_smooth_k(std::span<const TimedValue> series, std::size_t neighbours);

/// Neighbour count used by lowess_smooth for a series of length n.
std::size_t lowess_neighbours(std::size_t n, double span_fraction);

}  // namespace mapsem
