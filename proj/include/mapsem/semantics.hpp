#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mapsem/geo.hpp"

namespace mapsem {

enum class SemanticKind {
  kTunnel,
  kBridge,
  kBump,
  kCatsEye,
  kRailwayCrossing,
  kRoundabout,
  kIntersectionTurn,
  kStopSign,
  kTrafficLight,
  kUnderpass,
  kStairs,
  kEscalator,
  kFootbridge,
  kCrosswalk,
};

inline constexpr std::array kAllKinds{
    SemanticKind::kTunnel,    SemanticKind::kBridge,           SemanticKind::kBump,
    SemanticKind::kCatsEye,   SemanticKind::kRailwayCrossing,  SemanticKind::kRoundabout,
    SemanticKind::kIntersectionTurn, SemanticKind::kStopSign,  SemanticKind::kTrafficLight,
    SemanticKind::kUnderpass, SemanticKind::kStairs,           SemanticKind::kEscalator,
    SemanticKind::kFootbridge, SemanticKind::kCrosswalk,
};

std::string_view kind_name(SemanticKind kind);
/// Throws Error(kParse) for unknown names.
SemanticKind kind_from_name(std::string_view name);
bool is_vehicle_kind(SemanticKind kind);

/// One classifier firing on one trace.
struct SemanticDetection {
  SemanticKind kind{SemanticKind::kBump};
  std::string trace_id;
  std::int64_t t_start_ms{0};
  std::int64_t t_end_ms{0};
  LatLon location{};
  double weight{1.0};
  double confidence{1.0};
  std::optional<LatLon> start_location;
  std::optional<double> span_length_m;
  std::optional<int> step_count;
  std::optional<double> crossing_length_m;
  std::optional<std::string> node_id;

  friend bool operator==(const SemanticDetection&, const SemanticDetection&) = default;
};

/// Clustering weight from a location-accuracy estimate.
inline double accuracy_weight(double loc_accuracy_m) { return 1.0 / (1.0 + loc_accuracy_m); }

nlohmann::ordered_json detection_to_json(const SemanticDetection& d);
SemanticDetection detection_from_json(const nlohmann::json& j);

}  // namespace mapsem
