#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mapsem/geo.hpp"
#include "mapsem/semantics.hpp"
#include "mapsem/trace.hpp"

namespace mapsem::sim {

/// Sensor characteristics of one phone model.
struct DeviceProfile {
  std::string name;
  double inertial_hz{50.0};
  double gain{1.0};         // scales accelerometer, gyroscope and magnetometer
  double noise_scale{1.0};  // multiplies every white-noise sigma
  bool has_gyro{true};
  double loc_accuracy_m{4.0};
  double mount_tilt_deg{25.0};
};

/// A ground-truth feature. `a` and `b` are the entry and exit points along
/// the direction of travel (equal for point features). Junction kinds refer
/// to `node_id`; stop signs also name the upstream node of their approach.
struct PlacedSemantic {
  std::string id;
  SemanticKind kind{SemanticKind::kBump};
  LatLon a{};
  LatLon b{};
  std::optional<std::string> node_id;
  std::optional<std::string> approach_from;
  std::optional<int> steps;
  std::optional<bool> ascending;  // stairs and escalators
  std::optional<int> lanes;       // crosswalks
};

enum class AgentMode { kVehicle, kPedestrian };

struct AgentScript {
  std::string id;
  AgentMode mode{AgentMode::kVehicle};
  std::string profile;
  std::vector<LatLon> route;  // dense polyline, a few metres between points
  double speed_mps{10.0};
  std::int64_t start_ms{0};
  std::optional<double> duration_s;  // stops the agent early; required for a one-point route
  std::optional<bool> declared_indoor;
};

struct Scenario {
  std::string name;
  std::uint64_t seed{0};
  std::optional<double> inertial_hz;  // overrides every profile's rate
  RoadNetwork network;
  std::vector<DeviceProfile> profiles;
  std::vector<PlacedSemantic> semantics;
  std::vector<AgentScript> agents;
};

/// One agent passing one placed semantic.
struct TruthSpan {
  std::string trace_id;
  std::string semantic_id;
  SemanticKind kind{SemanticKind::kBump};
  std::int64_t t_start_ms{0};
  std::int64_t t_end_ms{0};
  LatLon location{};
  std::optional<LatLon> start_location;
};

/// A placed semantic traversed by at least one agent.
struct TruthInstance {
  std::string semantic_id;
  SemanticKind kind{SemanticKind::kBump};
  LatLon location{};
  std::optional<LatLon> start_location;
  std::optional<int> steps;
  std::optional<int> lanes;
  std::size_t traversals{0};
};

struct GroundTruth {
  std::string scenario;
  std::uint64_t seed{0};
  std::vector<std::string> trace_ids;
  std::vector<TruthInstance> instances;
  std::vector<TruthSpan> spans;
};

/// Throws Error(kInvalidScenario) naming the first problem found.
void validate_scenario(const Scenario& scenario);

/// Generates one agent's trace and the spans it traverses. The agent's
/// random stream depends only on the scenario seed and the agent index.
std::pair<Trace, std::vector<TruthSpan>> simulate_agent(const Scenario& scenario, std::size_t agent);

/// Builds the instance list from the spans of all agents.
GroundTruth assemble_truth(const Scenario& scenario, std::vector<TruthSpan> spans);

struct Simulation {
  std::vector<Trace> traces;
  GroundTruth truth;
};

Simulation simulate(const Scenario& scenario);

nlohmann::ordered_json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::ordered_json truth_to_json(const GroundTruth& t);
GroundTruth truth_from_json(const nlohmann::json& j);

/// The canonical evaluation suite: vehicle corridors, junctions, a signal
/// grid and pedestrian crossings, each placed kind at least 30 times.
std::vector<Scenario> build_benchmark(std::uint64_t seed);

/// Per-kind placed counts and agent totals of a suite.
nlohmann::ordered_json benchmark_manifest(const std::vector<Scenario>& suite);

/// SplitMix64 step, used to derive independent substreams.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mapsem::sim
