#pragma once

#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "mapsem/config.hpp"
#include "mapsem/network_index.hpp"
#include "mapsem/segmentation.hpp"
#include "mapsem/semantics.hpp"

namespace mapsem {

/// Slowdown counts for one incoming direction of one intersection.
struct ApproachStats {
  std::string node_id;
  std::string approach_id;
  int n_traces{0};
  int n_slowdown{0};
};

/// Ratio tests with inclusive thresholds. Throw Error(kOutOfRangeField) when
/// n_traces is not positive or n_slowdown lies outside [0, n_traces].
bool potential_stop(const ApproachStats& a, const Config& config);
bool potential_light(const ApproachStats& a, const Config& config);

enum class Regulation { kNone, kStopSigns, kTrafficLight };

struct IntersectionRegulation {
  std::string node_id;
  Regulation regulation{Regulation::kNone};
  std::vector<std::string> stop_approaches;  // set for kStopSigns
};

/// Applies the stop-sign rule (at least k-1 of k approaches are potential
/// stops), then the traffic-light rule (at least floor(k/2)+1 potential
/// lights). All entries must share one node id. k is the number of
/// approaches given. Throws Error(kInsufficientTraces) if any approach has
/// fewer than min_traces traces.
IntersectionRegulation infer_regulators(std::span<const ApproachStats> approaches, const Config& config);

/// One trace passing one intersection.
struct ApproachObservation {
  std::string trace_id;
  std::string node_id;
  std::string approach_id;  // "<upstream node>><node>"
  double min_speed_mps{0.0};
  LatLon node_location{};
  LatLon stop_location{};  // stop_line_offset_m back along the incoming edge
};

nlohmann::ordered_json observation_to_json(const ApproachObservation& o);
ApproachObservation observation_from_json(const nlohmann::json& j);

/// Passes within approach_pass_radius_m of intersection nodes. For each pass
/// the incoming edge is the incident edge best aligned with the direction of
/// travel and the speed is the minimum over the last approach_window_m before
/// the closest point.
std::vector<ApproachObservation> approach_observations(const std::string& trace_id,
                                                       std::span<const TrackPoint> track,
                                                       const NetworkIndex& index, const Config& config);

/// Single-writer accumulator of observations into per-approach counts. A
/// trace counts once per approach, with its lowest speed.
class ApproachAccumulator {
 public:
  void add(const ApproachObservation& o);
  std::vector<ApproachStats> stats(const Config& config) const;
  /// Stop-sign and traffic-light detections for every intersection whose
  /// approaches all reach min_traces. Other intersections are skipped.
  std::vector<SemanticDetection> regulator_features(const Config& config) const;

 private:
  mutable std::mutex mutex_;
  std::vector<ApproachObservation> observations_;
};

}  // namespace mapsem
