#include "mapsem/network_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mapsem/error.hpp"

namespace mapsem {

NetworkIndex::NetworkIndex(const RoadNetwork& net, double cell_m) : net_(&net), cell_m_(cell_m) {
  if (net.nodes().empty()) return;
  double lat = 0.0, lon = 0.0;
  for (const auto& [id, p] : net.nodes()) {
    lat += p.lat_deg;
    lon += p.lon_deg;
  }
  const double n = static_cast<double>(net.nodes().size());
  frame_ = LocalFrame({lat / n, lon / n});
  for (std::size_t e = 0; e < net.edges().size(); ++e) {
    const auto a = frame_.to_local(net.node(net.edges()[e].from));
    const auto b = frame_.to_local(net.node(net.edges()[e].to));
    const auto x0 = static_cast<std::int64_t>(std::floor(std::min(a.east_m, b.east_m) / cell_m_));
    const auto x1 = static_cast<std::int64_t>(std::floor(std::max(a.east_m, b.east_m) / cell_m_));
    const auto y0 = static_cast<std::int64_t>(std::floor(std::min(a.north_m, b.north_m) / cell_m_));
    const auto y1 = static_cast<std::int64_t>(std::floor(std::max(a.north_m, b.north_m) / cell_m_));
    for (auto cx = x0; cx <= x1; ++cx) {
      for (auto cy = y0; cy <= y1; ++cy) cells_[key(cx, cy)].push_back(e);
    }
  }
}

std::vector<std::size_t> NetworkIndex::edges_near(const LatLon& p, double radius_m) const {
  std::vector<std::size_t> out;
  const auto q = frame_.to_local(p);
  // Slack covers the tangent-plane distortion at city scale.
  const double r = radius_m * 1.01 + 1.0;
  const auto x0 = static_cast<std::int64_t>(std::floor((q.east_m - r) / cell_m_));
  const auto x1 = static_cast<std::int64_t>(std::floor((q.east_m + r) / cell_m_));
  const auto y0 = static_cast<std::int64_t>(std::floor((q.north_m - r) / cell_m_));
  const auto y1 = static_cast<std::int64_t>(std::floor((q.north_m + r) / cell_m_));
  for (auto cx = x0; cx <= x1; ++cx) {
    for (auto cy = y0; cy <= y1; ++cy) {
      auto it = cells_.find(key(cx, cy));
      if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EdgeProjection NetworkIndex::project(const LatLon& p, std::size_t edge) const {
  const LocalFrame local(p);
  const auto& e = net_->edges()[edge];
  const auto a = local.to_local(net_->node(e.from));
  const auto b = local.to_local(net_->node(e.to));
  const double dx = b.east_m - a.east_m;
  const double dy = b.north_m - a.north_m;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? -(a.east_m * dx + a.north_m * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const EastNorth foot{a.east_m + t * dx, a.north_m + t * dy};
  return {edge, t, local.to_geo(foot), std::hypot(foot.east_m, foot.north_m)};
}

std::optional<EdgeProjection> NetworkIndex::nearest(const LatLon& p, double radius_m, bool roads_only) const {
  std::optional<EdgeProjection> best;
  for (std::size_t e : edges_near(p, radius_m)) {
    if (roads_only && net_->edges()[e].kind != EdgeKind::kRoad) continue;
    const auto proj = project(p, e);
    if (proj.distance_m > radius_m) continue;
    if (!best || proj.distance_m < best->distance_m) best = proj;
  }
  return best;
}

std::vector<LatLon> snap_to_network(std::span<const LatLon> points, const NetworkIndex& index, double radius_m) {
  if (index.network().empty()) throw Error(ErrorCode::kEmptyNetwork, "cannot snap to an empty network");
  std::vector<LatLon> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const auto proj = index.nearest(p, radius_m, true);
    // Points already on an edge (within a micrometre) are left bit-identical.
    out.push_back(proj && proj->distance_m > 1e-6 ? proj->foot : p);
  }
  return out;
}

}  // namespace mapsem
