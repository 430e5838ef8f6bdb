#include "mapsem/trace.hpp"

#include <algorithm>
#include <cmath>

namespace mapsem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonMonotonicTime:
      return "NonMonotonicTime";
    case ErrorCode::kOutOfRangeField:
      return "OutOfRangeField";
    case ErrorCode::kTooShort:
      return "TooShort";
    case ErrorCode::kDegenerateOrientation:
      return "DegenerateOrientation";
    case ErrorCode::kEmptySeries:
      return "EmptySeries";
    case ErrorCode::kEmptyNetwork:
      return "EmptyNetwork";
    case ErrorCode::kInsufficientTraces:
      return "InsufficientTraces";
    case ErrorCode::kInvalidScenario:
      return "InvalidScenario";
    case ErrorCode::kProvenanceMismatch:
      return "ProvenanceMismatch";
    case ErrorCode::kParse:
      return "ParseError";
    case ErrorCode::kIo:
      return "IoError";
  }
  return "Unknown";
}

namespace {

bool finite(const Vec3& v) { return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z); }

std::optional<std::string> field_violation(const SensorSample& s) {
  if (!std::isfinite(s.lat_deg) || std::abs(s.lat_deg) > 90.0) return "lat_deg";
  if (!std::isfinite(s.lon_deg) || std::abs(s.lon_deg) > 180.0) return "lon_deg";
  if (!std::isfinite(s.loc_accuracy_m) || s.loc_accuracy_m < 0.0) return "loc_accuracy_m";
  if (s.gravity) {
    const double g = norm(*s.gravity);
    if (!finite(*s.gravity) || g < kGravityNormMin || g > kGravityNormMax) return "gravity";
  }
  if (s.serving_rss_dbm) {
    const double r = *s.serving_rss_dbm;
    if (!std::isfinite(r) || r < kRssMinDbm || r > kRssMaxDbm) return "serving_rss_dbm";
  }
  if (s.accel && !finite(*s.accel)) return "accel";
  if (s.gyro && !finite(*s.gyro)) return "gyro";
  if (s.magnet && !finite(*s.magnet)) return "magnet";
  return std::nullopt;
}

}  // namespace

ValidatedTrace validate_trace(Trace raw) {
  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    if (i > 0 && raw.samples[i].timestamp_ms <= raw.samples[i - 1].timestamp_ms) {
      return Rejection{ErrorCode::kNonMonotonicTime, i, "timestamp_ms not strictly increasing"};
    }
    if (auto field = field_violation(raw.samples[i])) {
      return Rejection{ErrorCode::kOutOfRangeField, i, *field};
    }
  }
  if (raw.samples.size() < 2) {
    return Rejection{ErrorCode::kTooShort, raw.samples.size(), "fewer than 2 samples"};
  }
  return raw;
}

Trace require_valid(Trace raw) {
  const std::string id = raw.trace_id;
  auto result = validate_trace(std::move(raw));
  if (auto* rejection = std::get_if<Rejection>(&result)) {
    throw Error(rejection->code,
                "trace '" + id + "' sample " + std::to_string(rejection->sample_index) + ": " + rejection->detail);
  }
  return std::get<Trace>(std::move(result));
}

RoadNetwork::RoadNetwork(std::map<std::string, LatLon> nodes, std::vector<RoadEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::map<std::string, int> degree;
  for (const auto& e : edges_) {
    if (!nodes_.contains(e.from) || !nodes_.contains(e.to)) {
      throw Error(ErrorCode::kOutOfRangeField, "edge endpoint missing from nodes: " + e.from + " -> " + e.to);
    }
    if (e.kind == EdgeKind::kRoad) {
      ++degree[e.from];
      ++degree[e.to];
    }
  }
  for (const auto& [id, d] : degree) {
    if (d >= 3) intersections_.push_back(id);
  }
}

bool RoadNetwork::is_intersection(const std::string& node_id) const {
  return std::binary_search(intersections_.begin(), intersections_.end(), node_id);
}

std::vector<std::size_t> RoadNetwork::incident_edges(const std::string& node_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (edges_[i].from == node_id || edges_[i].to == node_id) out.push_back(i);
  }
  return out;
}

}  // namespace mapsem
