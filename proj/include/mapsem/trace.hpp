#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mapsem/error.hpp"
#include "mapsem/geo.hpp"

namespace mapsem {

struct Orientation {
  double azimuth_rad{0.0};
  double pitch_rad{0.0};
  double roll_rad{0.0};
  friend bool operator==(const Orientation&, const Orientation&) = default;
};

struct NeighborCell {
  std::string cell_id;
  double rss_dbm{0.0};
  friend bool operator==(const NeighborCell&, const NeighborCell&) = default;
};

/// One timestamped reading. Channels the device did not report are absent,
/// never zero-filled.
struct SensorSample {
  std::int64_t timestamp_ms{0};
  std::optional<Vec3> accel;    // m/s^2, device frame
  std::optional<Vec3> gyro;     // rad/s, device frame
  std::optional<Vec3> magnet;   // uT, device frame
  std::optional<Vec3> gravity;  // m/s^2, device frame
  std::optional<Orientation> orientation;
  std::optional<std::string> serving_cell;
  std::optional<double> serving_rss_dbm;
  std::vector<NeighborCell> neighbor_cells;
  double lat_deg{0.0};
  double lon_deg{0.0};
  double loc_accuracy_m{0.0};

  LatLon location() const { return {lat_deg, lon_deg}; }
  friend bool operator==(const SensorSample&, const SensorSample&) = default;
};

struct Trace {
  std::string trace_id;
  std::vector<SensorSample> samples;
  std::optional<bool> declared_indoor;
  friend bool operator==(const Trace&, const Trace&) = default;
};

struct Rejection {
  ErrorCode code;
  std::size_t sample_index{0};
  std::string detail;
};

/// Either the admitted trace or the first violated rule.
using ValidatedTrace = std::variant<Trace, Rejection>;

ValidatedTrace validate_trace(Trace raw);

/// Throws Error when the trace is rejected.
Trace require_valid(Trace raw);

inline constexpr double kGravityNormMin = 8.0;
inline constexpr double kGravityNormMax = 11.6;
inline constexpr double kRssMinDbm = -140.0;
inline constexpr double kRssMaxDbm = -20.0;

enum class EdgeKind { kRoad, kRailway };

struct RoadEdge {
  std::string from;
  std::string to;
  EdgeKind kind{EdgeKind::kRoad};
};

/// Node/edge graph in WGS84. Intersections are derived on construction.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  RoadNetwork(std::map<std::string, LatLon> nodes, std::vector<RoadEdge> edges);

  const std::map<std::string, LatLon>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const std::vector<std::string>& intersections() const { return intersections_; }
  bool empty() const { return edges_.empty(); }
  bool is_intersection(const std::string& node_id) const;
  const LatLon& node(const std::string& id) const { return nodes_.at(id); }
  /// Edge indices incident to a node.
  std::vector<std::size_t> incident_edges(const std::string& node_id) const;

 private:
  std::map<std::string, LatLon> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::string> intersections_;
};

}  // namespace mapsem
