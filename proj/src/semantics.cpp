#include "mapsem/semantics.hpp"

#include "mapsem/error.hpp"

namespace mapsem {

std::string_view kind_name(SemanticKind kind) {
  switch (kind) {
    case SemanticKind::kTunnel: return "tunnel";
    case SemanticKind::kBridge: return "bridge";
    case SemanticKind::kBump: return "bump";
    case SemanticKind::kCatsEye: return "cats_eye";
    case SemanticKind::kRailwayCrossing: return "railway_crossing";
    case SemanticKind::kRoundabout: return "roundabout";
    case SemanticKind::kIntersectionTurn: return "intersection_turn";
    case SemanticKind::kStopSign: return "stop_sign";
    case SemanticKind::kTrafficLight: return "traffic_light";
    case SemanticKind::kUnderpass: return "underpass";
    case SemanticKind::kStairs: return "stairs";
    case SemanticKind::kEscalator: return "escalator";
    case SemanticKind::kFootbridge: return "footbridge";
    case SemanticKind::kCrosswalk: return "crosswalk";
  }
  return "unknown";
}

SemanticKind kind_from_name(std::string_view name) {
  for (auto k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::kParse, "unknown semantic kind '" + std::string(name) + "'");
}

bool is_vehicle_kind(SemanticKind kind) {
  switch (kind) {
    case SemanticKind::kUnderpass:
    case SemanticKind::kStairs:
    case SemanticKind::kEscalator:
    case SemanticKind::kFootbridge:
    case SemanticKind::kCrosswalk:
      return false;
    default:
      return true;
  }
}

nlohmann::ordered_json detection_to_json(const SemanticDetection& d) {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(d.kind);
  j["trace_id"] = d.trace_id;
  j["t_start_ms"] = d.t_start_ms;
  j["t_end_ms"] = d.t_end_ms;
  j["lat_deg"] = d.location.lat_deg;
  j["lon_deg"] = d.location.lon_deg;
  j["weight"] = d.weight;
  j["confidence"] = d.confidence;
  if (d.start_location) j["start_location"] = {d.start_location->lat_deg, d.start_location->lon_deg};
  if (d.span_length_m) j["span_length_m"] = *d.span_length_m;
  if (d.step_count) j["step_count"] = *d.step_count;
  if (d.crossing_length_m) j["crossing_length_m"] = *d.crossing_length_m;
  if (d.node_id) j["node_id"] = *d.node_id;
  return j;
}

SemanticDetection detection_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "detection is not a JSON object");
  SemanticDetection d;
  try {
    d.kind = kind_from_name(j.at("kind").get<std::string>());
    d.trace_id = j.at("trace_id").get<std::string>();
    d.t_start_ms = j.at("t_start_ms").get<std::int64_t>();
    d.t_end_ms = j.at("t_end_ms").get<std::int64_t>();
    d.location = {j.at("lat_deg").get<double>(), j.at("lon_deg").get<double>()};
    d.weight = j.at("weight").get<double>();
    d.confidence = j.value("confidence", 1.0);
    if (j.contains("start_location")) {
      const auto& s = j["start_location"];
      d.start_location = LatLon{s.at(0).get<double>(), s.at(1).get<double>()};
    }
    if (j.contains("span_length_m")) d.span_length_m = j["span_length_m"].get<double>();
    if (j.contains("step_count")) d.step_count = j["step_count"].get<int>();
    if (j.contains("crossing_length_m")) d.crossing_length_m = j["crossing_length_m"].get<double>();
    if (j.contains("node_id")) d.node_id = j["node_id"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad detection: ") + e.what());
  }
  if (!(d.weight > 0.0)) throw Error(ErrorCode::kParse, "detection weight must be positive");
  return d;
}

}  // namespace mapsem
