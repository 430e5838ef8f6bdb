#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mapsem/geo.hpp"
#include "mapsem/preprocess.hpp"

namespace mapsem {

/// Median (mean of the middle pair for even sizes); reorders `v`.
inline std::optional<double> median(std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Lower q-quantile (nearest rank); reorders `v`.
inline std::optional<double> quantile(std::vector<double>& v, double q) {
  if (v.empty()) return std::nullopt;
  const auto k = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

/// Location at time t, linearly interpolated and clamped to the span.
inline LatLon location_at(std::span<const MotionFrameSample> samples, std::int64_t t) {
  auto it = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const MotionFrameSample& s, std::int64_t v) { return s.timestamp_ms < v; });
  if (it == samples.begin()) return samples.front().location;
  if (it == samples.end()) return samples.back().location;
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double u = static_cast<double>(t - a.timestamp_ms) / static_cast<double>(b.timestamp_ms - a.timestamp_ms);
  return {a.location.lat_deg + u * (b.location.lat_deg - a.location.lat_deg),
          a.location.lon_deg + u * (b.location.lon_deg - a.location.lon_deg)};
}

/// Intersection of segments p0-p1 and q0-q1 as parameters (u along p, v
/// along q), both in [0, 1]; nullopt when they miss or are parallel.
inline std::optional<std::pair<double, double>> segment_intersection(const EastNorth& p0, const EastNorth& p1,
                                                                     const EastNorth& q0, const EastNorth& q1) {
  const double rx = p1.east_m - p0.east_m, ry = p1.north_m - p0.north_m;
  const double sx = q1.east_m - q0.east_m, sy = q1.north_m - q0.north_m;
  const double denom = rx * sy - ry * sx;
  if (denom == 0.0) return std::nullopt;
  const double qpx = q0.east_m - p0.east_m, qpy = q0.north_m - p0.north_m;
  const double u = (qpx * sy - qpy * sx) / denom;
  const double v = (qpx * ry - qpy * rx) / denom;
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return std::nullopt;
  return std::pair{u, v};
}

}  // namespace mapsem
