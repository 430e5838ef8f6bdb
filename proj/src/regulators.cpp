#include "mapsem/regulators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mapsem/error.hpp"

namespace mapsem {

namespace {

constexpr double kRatioTolerance = 1e-12;

double slowdown_ratio(const ApproachStats& a) {
  if (a.n_traces <= 0 || a.n_slowdown < 0 || a.n_slowdown > a.n_traces) {
    throw Error(ErrorCode::kOutOfRangeField, "approach " + a.approach_id + " has inconsistent counts");
  }
  return static_cast<double>(a.n_slowdown) / static_cast<double>(a.n_traces);
}

}  // namespace

bool potential_stop(const ApproachStats& a, const Config& c) {
  return slowdown_ratio(a) >= c.potential_stop_ratio - kRatioTolerance;
}

bool potential_light(const ApproachStats& a, const Config& c) {
  return slowdown_ratio(a) >= c.potential_light_ratio - kRatioTolerance;
}

IntersectionRegulation infer_regulators(std::span<const ApproachStats> approaches, const Config& c) {
  IntersectionRegulation out;
  if (approaches.empty()) return out;
  out.node_id = approaches.front().node_id;
  for (const auto& a : approaches) {
    if (a.node_id != out.node_id) throw Error(ErrorCode::kOutOfRangeField, "approaches of different intersections");
    if (a.n_traces < c.min_traces) {
      throw Error(ErrorCode::kInsufficientTraces, "approach " + a.approach_id + " of " + a.node_id + " has " +
                                                      std::to_string(a.n_traces) + " traces");
    }
  }
  const std::size_t k = approaches.size();
  std::size_t stops = 0, lights = 0;
  for (const auto& a : approaches) {
    stops += potential_stop(a, c) ? 1 : 0;
    lights += potential_light(a, c) ? 1 : 0;
  }
  if (stops >= k - 1 && stops > 0) {
    out.regulation = Regulation::kStopSigns;
    for (const auto& a : approaches) {
      if (potential_stop(a, c)) out.stop_approaches.push_back(a.approach_id);
    }
  } else if (lights >= k / 2 + 1) {
    out.regulation = Regulation::kTrafficLight;
  }
  return out;
}

nlohmann::ordered_json observation_to_json(const ApproachObservation& o) {
  return {{"trace_id", o.trace_id},
          {"node_id", o.node_id},
          {"approach_id", o.approach_id},
          {"min_speed_mps", o.min_speed_mps},
          {"node_location", {o.node_location.lat_deg, o.node_location.lon_deg}},
          {"stop_location", {o.stop_location.lat_deg, o.stop_location.lon_deg}}};
}

ApproachObservation observation_from_json(const nlohmann::json& j) {
  try {
    ApproachObservation o;
    o.trace_id = j.at("trace_id").get<std::string>();
    o.node_id = j.at("node_id").get<std::string>();
    o.approach_id = j.at("approach_id").get<std::string>();
    o.min_speed_mps = j.at("min_speed_mps").get<double>();
    o.node_location = {j.at("node_location").at(0).get<double>(), j.at("node_location").at(1).get<double>()};
    o.stop_location = {j.at("stop_location").at(0).get<double>(), j.at("stop_location").at(1).get<double>()};
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad approach observation: ") + e.what());
  }
}

std::vector<ApproachObservation> approach_observations(const std::string& trace_id,
                                                       std::span<const TrackPoint> track,
                                                       const NetworkIndex& index, const Config& c) {
  const auto& net = index.network();
  const double radius = c.approach_pass_radius_m;
  std::map<std::string, std::vector<std::size_t>> near;  // node -> track indices within radius
  for (std::size_t i = 0; i < track.size(); ++i) {
    std::vector<std::string> seen;
    for (std::size_t e : index.edges_near(track[i].location, radius)) {
      for (const auto* id : {&net.edges()[e].from, &net.edges()[e].to}) {
        if (std::find(seen.begin(), seen.end(), *id) != seen.end()) continue;
        seen.push_back(*id);
        if (net.is_intersection(*id) && haversine_m(net.node(*id), track[i].location) < radius) {
          near[*id].push_back(i);
        }
      }
    }
  }

  std::vector<double> cum(track.size(), 0.0);
  for (std::size_t i = 1; i < track.size(); ++i) cum[i] = cum[i - 1] + haversine_m(track[i - 1].location, track[i].location);

  std::vector<ApproachObservation> out;
  for (const auto& [node_id, idx] : near) {
    const LatLon node = net.node(node_id);
    std::size_t p = 0;
    while (p < idx.size()) {
      std::size_t q = p;
      while (q + 1 < idx.size() && idx[q + 1] == idx[q] + 1) ++q;
      std::size_t closest = idx[p];
      for (std::size_t r = p; r <= q; ++r) {
        if (haversine_m(track[idx[r]].location, node) < haversine_m(track[closest].location, node)) closest = idx[r];
      }
      p = q + 1;

      std::size_t first = closest;
      while (first > 0 && cum[closest] - cum[first - 1] <= c.approach_window_m) --first;
      double min_speed = track[closest].speed_mps;
      for (std::size_t i = first; i <= closest; ++i) min_speed = std::min(min_speed, track[i].speed_mps);
      const double travel = haversine_m(track[first].location, track[closest].location) >= 5.0
                                ? bearing_rad(track[first].location, track[closest].location)
                                : track[closest].heading_rad;

      std::optional<std::string> upstream;
      double best = 0.0;
      for (std::size_t e : net.incident_edges(node_id)) {
        const auto& edge = net.edges()[e];
        if (edge.kind != EdgeKind::kRoad) continue;
        const std::string& other = edge.from == node_id ? edge.to : edge.from;
        const double misalign = std::abs(wrap_angle(bearing_rad(net.node(other), node) - travel));
        if (!upstream || misalign < best) {
          upstream = other;
          best = misalign;
        }
      }
      if (!upstream) continue;

      ApproachObservation o;
      o.trace_id = trace_id;
      o.node_id = node_id;
      o.approach_id = *upstream + ">" + node_id;
      o.min_speed_mps = min_speed;
      o.node_location = node;
      const LocalFrame frame(node);
      const auto up = frame.to_local(net.node(*upstream));
      const double len = std::hypot(up.east_m, up.north_m);
      const double back = std::min(c.stop_line_offset_m, 0.5 * len);
      o.stop_location = frame.to_geo({up.east_m / len * back, up.north_m / len * back});
      out.push_back(std::move(o));
    }
  }
  return out;
}

void ApproachAccumulator::add(const ApproachObservation& o) {
  const std::lock_guard lock(mutex_);
  observations_.push_back(o);
}

namespace {

struct ApproachGroup {
  LatLon node_location{};
  LatLon stop_location{};
  std::map<std::string, double> min_speed;  // per trace
};

using Groups = std::map<std::string, std::map<std::string, ApproachGroup>>;  // node -> approach -> group

Groups group(const std::vector<ApproachObservation>& observations) {
  Groups g;
  for (const auto& o : observations) {
    auto& a = g[o.node_id][o.approach_id];
    a.node_location = o.node_location;
    a.stop_location = o.stop_location;
    auto [it, inserted] = a.min_speed.emplace(o.trace_id, o.min_speed_mps);
    if (!inserted) it->second = std::min(it->second, o.min_speed_mps);
  }
  return g;
}

ApproachStats to_stats(const std::string& node, const std::string& approach, const ApproachGroup& a,
                       const Config& c) {
  ApproachStats s{node, approach, static_cast<int>(a.min_speed.size()), 0};
  for (const auto& [trace, speed] : a.min_speed) s.n_slowdown += speed < c.slowdown_speed_mps ? 1 : 0;
  return s;
}

}  // namespace

std::vector<ApproachStats> ApproachAccumulator::stats(const Config& config) const {
  const std::lock_guard lock(mutex_);
  std::vector<ApproachStats> out;
  for (const auto& [node, approaches] : group(observations_)) {
    for (const auto& [id, a] : approaches) out.push_back(to_stats(node, id, a, config));
  }
  return out;
}

std::vector<SemanticDetection> ApproachAccumulator::regulator_features(const Config& config) const {
  const std::lock_guard lock(mutex_);
  std::vector<SemanticDetection> out;
  for (const auto& [node, approaches] : group(observations_)) {
    std::vector<ApproachStats> stats;
    for (const auto& [id, a] : approaches) stats.push_back(to_stats(node, id, a, config));
    if (std::any_of(stats.begin(), stats.end(), [&](const ApproachStats& s) { return s.n_traces < config.min_traces; })) {
      continue;
    }
    const auto r = infer_regulators(stats, config);
    auto emit = [&](SemanticKind kind, const LatLon& where, const ApproachGroup& a) {
      SemanticDetection d;
      d.kind = kind;
      d.trace_id = "";
      d.location = where;
      d.weight = static_cast<double>(a.min_speed.size());
      d.node_id = node;
      out.push_back(std::move(d));
    };
    if (r.regulation == Regulation::kStopSigns) {
      for (const auto& id : r.stop_approaches) emit(SemanticKind::kStopSign, approaches.at(id).stop_location, approaches.at(id));
    } else if (r.regulation == Regulation::kTrafficLight) {
      ApproachGroup all;
      all.node_location = approaches.begin()->second.node_location;
      for (const auto& [id, a] : approaches) all.min_speed.insert(a.min_speed.begin(), a.min_speed.end());
      emit(SemanticKind::kTrafficLight, all.node_location, all);
    }
  }
  return out;
}

}  // namespace mapsem
