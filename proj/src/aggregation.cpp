#include "mapsem/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <unordered_map>
#include <utility>

#include "mapsem/error.hpp"
#include "mapsem/pedestrian.hpp"
#include "mapsem/track_util.hpp"

namespace mapsem {

namespace {

// Neighbour lists (self included) via a uniform grid in a local tangent
// plane; the cell is slightly larger than eps so that projection error
// cannot hide a true neighbour, and every candidate is confirmed by
// haversine.
std::vector<std::vector<std::size_t>> neighbourhoods(std::span<const LatLon> pts, double eps_m) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> out(n);
  if (n == 0) return out;
  double lat = 0.0, lon = 0.0;
  for (const auto& p : pts) {
    lat += p.lat_deg;
    lon += p.lon_deg;
  }
  const LocalFrame frame({lat / static_cast<double>(n), lon / static_cast<double>(n)});
  const double cell = eps_m * 1.05;
  auto key = [](std::int64_t cx, std::int64_t cy) { return cx * 2000003 + cy; };
  std::vector<std::pair<std::int64_t, std::int64_t>> coords(n);
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = frame.to_local(pts[i]);
    coords[i] = {static_cast<std::int64_t>(std::floor(q.east_m / cell)),
                 static_cast<std::int64_t>(std::floor(q.north_m / cell))};
    grid[key(coords[i].first, coords[i].second)].push_back(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = grid.find(key(coords[i].first + dx, coords[i].second + dy));
        if (it == grid.end()) continue;
        for (std::size_t j : it->second) {
          if (haversine_m(pts[i], pts[j]) <= eps_m) out[i].push_back(j);
        }
      }
    }
    std::sort(out[i].begin(), out[i].end());
  }
  return out;
}

}  // namespace

std::vector<int> dbscan(std::span<const LatLon> points, double eps_m, std::size_t min_pts) {
  const std::size_t n = points.size();
  const auto nb = neighbourhoods(points, eps_m);
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = nb[i].size() >= min_pts;

  std::vector<int> label(n, kNoise);
  int next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] != kNoise) continue;
    label[i] = next;
    stack.assign(1, i);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : nb[u]) {
        if (core[v] && label[v] == kNoise) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = 0.0;
    for (std::size_t j : nb[i]) {  // ascending, so strict < keeps the lowest index on ties
      if (!core[j]) continue;
      const double d = haversine_m(points[i], points[j]);
      if (label[i] == kNoise || d < best) {
        label[i] = label[j];
        best = d;
      }
    }
  }
  return label;
}

LatLon weighted_location(std::span<const LatLon> points, std::span<const double> weights) {
  if (points.empty() || points.size() != weights.size()) {
    throw Error(ErrorCode::kOutOfRangeField, "weighted_location needs one weight per member");
  }
  double w = 0.0, lat = 0.0, lon = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(weights[i] > 0.0)) throw Error(ErrorCode::kOutOfRangeField, "member weight must be positive");
    w += weights[i];
    lat += weights[i] * points[i].lat_deg;
    lon += weights[i] * points[i].lon_deg;
  }
  return {lat / w, lon / w};
}

double eps_for(SemanticKind kind, const Config& c) {
  return is_vehicle_kind(kind) ? c.eps_vehicle_m : c.eps_pedestrian_m;
}

namespace {

bool is_regulator(SemanticKind k) { return k == SemanticKind::kStopSign || k == SemanticKind::kTrafficLight; }

void recompute(FeatureCluster& c) {
  std::vector<LatLon> p;
  std::vector<double> w;
  for (const auto& m : c.members) {
    p.push_back(m.location);
    w.push_back(m.weight);
  }
  c.centroid = weighted_location(p, w);
  c.weight_sum = 0.0;
  for (double x : w) c.weight_sum += x;
}

}  // namespace

std::size_t Registry::upsert(const SemanticDetection& d) {
  const std::unique_lock lock(mutex_);
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    const auto& c = clusters_[i];
    if (c.kind != d.kind) continue;
    if (is_regulator(d.kind) && c.members.front().node_id != d.node_id) continue;
    const double dist = haversine_m(c.centroid, d.location);
    if (dist <= eps_for(d.kind, config_) && (!best || dist < best_d)) {
      best = i;
      best_d = dist;
    }
  }
  if (!best) {
    clusters_.push_back({d.kind, {}, d.location, 0.0, false});
    best = clusters_.size() - 1;
  }
  auto& c = clusters_[*best];
  c.members.push_back(d);
  recompute(c);
  if (is_regulator(c.kind) || static_cast<double>(c.support()) >= config_.min_support) c.emitted = true;

  if (!log_path_.empty()) {
    std::ofstream out(log_path_, std::ios::app);
    if (!out) throw Error(ErrorCode::kIo, "cannot append to " + log_path_);
    out << detection_to_json(d).dump() << '\n';
  }
  return *best;
}

std::vector<FeatureCluster> Registry::snapshot() const {
  const std::shared_lock lock(mutex_);
  return clusters_;
}

void Registry::replay(const std::string& path) {
  const std::string saved = std::exchange(log_path_, std::string());
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      upsert(detection_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  log_path_ = saved;
}

std::vector<FeatureCluster> cluster_detections(std::span<const SemanticDetection> detections, const Config& config) {
  std::vector<FeatureCluster> out;
  for (auto kind : kAllKinds) {
    std::vector<const SemanticDetection*> members;
    for (const auto& d : detections) {
      if (d.kind == kind) members.push_back(&d);
    }
    if (members.empty()) continue;
    if (is_regulator(kind)) {
      for (const auto* d : members) {
        FeatureCluster c{kind, {*d}, {}, 0.0, true};
        recompute(c);
        out.push_back(std::move(c));
      }
      continue;
    }
    std::vector<LatLon> pts;
    for (const auto* d : members) pts.push_back(d->location);
    const auto labels = dbscan(pts, eps_for(kind, config), static_cast<std::size_t>(config.min_pts));
    const int count = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<FeatureCluster> by_label(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (labels[i] != kNoise) by_label[static_cast<std::size_t>(labels[i])].members.push_back(*members[i]);
    }
    for (auto& c : by_label) {
      c.kind = kind;
      recompute(c);
      c.emitted = static_cast<double>(c.support()) >= config.min_support;
      out.push_back(std::move(c));
    }
  }
  return out;
}

MapFeature to_map_feature(const FeatureCluster& cluster, const Config& config) {
  MapFeature f;
  f.kind = cluster.kind;
  f.location = cluster.centroid;
  f.support = cluster.support();
  f.weight_sum = cluster.weight_sum;
  std::vector<double> spans, steps, crossings, conf;
  std::vector<LatLon> starts;
  std::vector<double> start_w;
  for (const auto& m : cluster.members) {
    if (m.span_length_m) spans.push_back(*m.span_length_m);
    if (m.step_count) steps.push_back(*m.step_count);
    if (m.crossing_length_m) crossings.push_back(*m.crossing_length_m);
    if (m.start_location) {
      starts.push_back(*m.start_location);
      start_w.push_back(m.weight);
    }
    conf.push_back(m.confidence);
    if (m.node_id) f.node_id = m.node_id;
  }
  f.span_length_m = median(spans);
  if (auto s = median(steps)) {
    f.step_count = static_cast<int>(std::lround(*s));
    if (f.kind == SemanticKind::kFootbridge && *f.step_count >= 1) {
      f.height_m = footbridge_height_m(*f.step_count, config.step_rise_m);
    }
  }
  if (!crossings.empty()) f.lane_count = lane_count(crossings, config.lane_width_m);
  if (!starts.empty()) f.start_location = weighted_location(starts, start_w);
  f.confidence = median(conf).value_or(1.0);
  return f;
}

nlohmann::ordered_json to_geojson(const FeatureSet& set) {
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["metadata"] = {{"config_hash", set.config_hash}, {"trace_ids", set.trace_ids}};
  fc["features"] = nlohmann::ordered_json::array();
  for (const auto& f : set.features) {
    nlohmann::ordered_json props;
    props["kind"] = kind_name(f.kind);
    props["support"] = f.support;
    props["weight_sum"] = f.weight_sum;
    props["confidence"] = f.confidence;
    if (f.span_length_m) props["span_length_m"] = *f.span_length_m;
    if (f.start_location) props["start_location"] = {f.start_location->lat_deg, f.start_location->lon_deg};
    if (f.step_count) props["step_count"] = *f.step_count;
    if (f.height_m) props["height_m"] = *f.height_m;
    if (f.lane_count) props["lane_count"] = *f.lane_count;
    if (f.node_id) props["node_id"] = *f.node_id;
    fc["features"].push_back({{"type", "Feature"},
                              {"geometry", {{"type", "Point"}, {"coordinates", {f.location.lon_deg, f.location.lat_deg}}}},
                              {"properties", props}});
  }
  return fc;
}

FeatureSet from_geojson(const nlohmann::json& j) {
  FeatureSet set;
  try {
    if (j.at("type") != "FeatureCollection") throw Error(ErrorCode::kParse, "not a FeatureCollection");
    if (j.contains("metadata")) {
      set.config_hash = j["metadata"].value("config_hash", "");
      set.trace_ids = j["metadata"].value("trace_ids", std::vector<std::string>{});
    }
    for (const auto& g : j.at("features")) {
      const auto& p = g.at("properties");
      const auto& c = g.at("geometry").at("coordinates");
      MapFeature f;
      f.kind = kind_from_name(p.at("kind").get<std::string>());
      f.location = {c.at(1).get<double>(), c.at(0).get<double>()};
      f.support = p.at("support").get<std::size_t>();
      f.weight_sum = p.value("weight_sum", 0.0);
      f.confidence = p.value("confidence", 1.0);
      if (p.contains("span_length_m")) f.span_length_m = p["span_length_m"].get<double>();
      if (p.contains("start_location")) {
        f.start_location = LatLon{p["start_location"].at(0).get<double>(), p["start_location"].at(1).get<double>()};
      }
      if (p.contains("step_count")) f.step_count = p["step_count"].get<int>();
      if (p.contains("height_m")) f.height_m = p["height_m"].get<double>();
      if (p.contains("lane_count")) f.lane_count = p["lane_count"].get<int>();
      if (p.contains("node_id")) f.node_id = p["node_id"].get<std::string>();
      set.features.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad feature collection: ") + e.what());
  }
  return set;
}

}  // namespace mapsem
