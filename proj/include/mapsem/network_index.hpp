#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mapsem/geo.hpp"
#include "mapsem/trace.hpp"

namespace mapsem {

struct EdgeProjection {
  std::size_t edge{0};
  double fraction{0.0};  // 0 at edge.from, 1 at edge.to
  LatLon foot{};
  double distance_m{0.0};
};

/// Uniform grid over the network's edges for radius queries. Exact geometry
/// is evaluated in a tangent plane centered on each query point. The network
/// must outlive the index.
class NetworkIndex {
 public:
  explicit NetworkIndex(const RoadNetwork& net, double cell_m = 100.0);

  const RoadNetwork& network() const { return *net_; }

  /// Candidate edges whose bounding box lies within radius_m of p, ascending.
  std::vector<std::size_t> edges_near(const LatLon& p, double radius_m) const;

  /// Nearest edge within radius_m; railway edges are skipped when roads_only.
  std::optional<EdgeProjection> nearest(const LatLon& p, double radius_m, bool roads_only) const;

  /// Projection of p onto one edge.
  EdgeProjection project(const LatLon& p, std::size_t edge) const;

 private:
  using CellKey = std::int64_t;
  CellKey key(std::int64_t cx, std::int64_t cy) const { return cx * 1000003 + cy; }

  const RoadNetwork* net_;
  LocalFrame frame_;
  double cell_m_;
  std::unordered_map<CellKey, std::vector<std::size_t>> cells_;
};

/// Orthogonal projection of every point onto the nearest road edge within
/// radius_m; farther points pass through. Throws Error(kEmptyNetwork).
std::vector<LatLon> snap_to_network(std::span<const LatLon> points, const NetworkIndex& index, double radius_m);

}  // namespace mapsem
