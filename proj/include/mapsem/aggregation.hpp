#pragma once

#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "mapsem/config.hpp"
#include "mapsem/geo.hpp"
#include "mapsem/semantics.hpp"

namespace mapsem {

inline constexpr int kNoise = -1;

/// DBSCAN with the haversine metric. A point is core when at least min_pts
/// points (itself included) lie within eps_m. Cluster ids are numbered in
/// order of each cluster's lowest-index core point. A border point joins the
/// cluster of its nearest core neighbour, ties going to the lowest index.
std::vector<int> dbscan(std::span<const LatLon> points, double eps_m, std::size_t min_pts);

/// Component-wise weighted mean. Requires at least one member and positive
/// weights; throws Error(kOutOfRangeField) otherwise.
LatLon weighted_location(std::span<const LatLon> points, std::span<const double> weights);

double eps_for(SemanticKind kind, const Config& config);

struct FeatureCluster {
  SemanticKind kind{SemanticKind::kBump};
  std::vector<SemanticDetection> members;
  LatLon centroid{};
  double weight_sum{0.0};
  bool emitted{false};

  std::size_t support() const { return members.size(); }
};

/// Incremental feature registry. Each detection joins the nearest same-kind
/// cluster whose centroid lies within eps, or starts a new one. Single
/// writer; readers take a snapshot.
class Registry {
 public:
  explicit Registry(Config config) : config_(std::move(config)) {}

  /// Appends every upserted detection as one JSON line to `path`.
  void attach_log(std::string path) { log_path_ = std::move(path); }

  /// Returns the index of the cluster that absorbed `d`.
  std::size_t upsert(const SemanticDetection& d);

  std::vector<FeatureCluster> snapshot() const;

  /// Upserts every detection of a log file in order, without re-logging.
  void replay(const std::string& path);

 private:
  Config config_;
  std::string log_path_;
  mutable std::shared_mutex mutex_;
  std::vector<FeatureCluster> clusters_;
};

/// One-shot clustering of a detection set, per kind. Noise is dropped.
/// Regulator kinds skip density clustering: each detection already
/// aggregates all traces at its intersection.
std::vector<FeatureCluster> cluster_detections(std::span<const SemanticDetection> detections, const Config& config);

struct MapFeature {
  SemanticKind kind{SemanticKind::kBump};
  LatLon location{};
  std::size_t support{0};
  double weight_sum{0.0};
  double confidence{1.0};
  std::optional<LatLon> start_location;
  std::optional<double> span_length_m;
  std::optional<int> step_count;
  std::optional<double> height_m;
  std::optional<int> lane_count;
  std::optional<std::string> node_id;
};

/// Merges member attributes: medians for span and step count, the minimum
/// rule for lane count, weighted mean for the bridge start.
MapFeature to_map_feature(const FeatureCluster& cluster, const Config& config);

struct FeatureSet {
  std::string config_hash;
  std::vector<std::string> trace_ids;
  std::vector<MapFeature> features;
};

nlohmann::ordered_json to_geojson(const FeatureSet& set);
FeatureSet from_geojson(const nlohmann::json& j);

}  // namespace mapsem
