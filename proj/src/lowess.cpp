#include "mapsem/lowess.hpp"

#include <algorithm>
#include <cmath>

#include "mapsem/error.hpp"

namespace mapsem {

namespace {

double tricube(double u) {
  if (u >= 1.0) return 0.0;
  const double a = 1.0 - u * u * u;
  return a * a * a;
}

}  // namespace

std::size_t lowess_neighbours(std::size_t n, double span_fraction) {
  const auto q = static_cast<std::size_t>(std::floor(span_fraction * static_cast<double>(n) + 1e-7));
  return std::clamp<std::size_t>(q, 2, std::max<std::size_t>(n, 2));
}

std::vector<TimedValue> lowess_smooth(std::span<const TimedValue> series, double span_fraction) {
  if (!(span_fraction > 0.0 && span_fraction <= 1.0)) {
    throw Error(ErrorCode::kOutOfRangeField, "span_fraction must lie in (0, 1]");
  }
  return lowess_smooth_k(series, lowess_neighbours(series.size(), span_fraction));
}

std::vector<TimedValue> lowess_smooth_k(std::span<const TimedValue> series, std::size_t neighbours) {
  const std::size_t n = series.size();
  if (n == 0) throw Error(ErrorCode::kEmptySeries, "lowess on an empty series");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(series[i].t > series[i - 1].t)) throw Error(ErrorCode::kNonMonotonicTime, "lowess requires increasing t");
  }
  std::vector<TimedValue> out(series.begin(), series.end());
  if (n == 1) return out;
  const std::size_t q = std::clamp<std::size_t>(neighbours, 2, n);

  // [left, left + q) is the q-nearest window of point i; it only moves right.
  std::size_t left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = series[i].t;
    while (left + q < n && series[left + q].t - ti < ti - series[left].t) ++left;
    const std::size_t right = left + q - 1;
    const double h = std::max(ti - series[left].t, series[right].t - ti);

    double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
    for (std::size_t j = left; j <= right; ++j) {
      const double x = series[j].t - ti;
      const double w = tricube(std::abs(x) / h);
      if (w == 0.0) continue;
      s0 += w;
      s1 += w * x;
      s2 += w * x * x;
      t0 += w * series[j].value;
      t1 += w * x * series[j].value;
    }
    const double det = s0 * s2 - s1 * s1;
    if (det > 1e-12 * s0 * s2 && det > 0.0) {
      out[i].value = (s2 * t0 - s1 * t1) / det;
    } else {
      out[i].value = t0 / s0;
    }
  }
  return out;
}

}  // namespace mapsem
