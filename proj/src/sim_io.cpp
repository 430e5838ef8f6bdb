#include <cmath>
#include <set>

#include "mapsem/error.hpp"
#include "mapsem/network_index.hpp"
#include "mapsem/simulator.hpp"
#include "mapsem/trace_io.hpp"

namespace mapsem::sim {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidScenario, what); }

bool valid_rate(double hz) { return hz > 0.0 && hz <= 1000.0 && std::fmod(1000.0, hz) == 0.0 && hz == std::round(hz); }

bool valid_point(const LatLon& p) {
  return std::isfinite(p.lat_deg) && std::isfinite(p.lon_deg) && std::abs(p.lat_deg) <= 90.0 &&
         std::abs(p.lon_deg) <= 180.0;
}

nlohmann::ordered_json point_json(const LatLon& p) { return nlohmann::ordered_json::array({p.lat_deg, p.lon_deg}); }

LatLon point_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::kParse, "expected [lat, lon]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::string mode_name(AgentMode m) { return m == AgentMode::kVehicle ? "vehicle" : "pedestrian"; }

AgentMode mode_from(const std::string& s) {
  if (s == "vehicle") return AgentMode::kVehicle;
  if (s == "pedestrian") return AgentMode::kPedestrian;
  throw Error(ErrorCode::kParse, "unknown agent mode '" + s + "'");
}

template <typename T>
void put_opt(nlohmann::ordered_json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void validate_scenario(const Scenario& sc) {
  if (sc.inertial_hz && !valid_rate(*sc.inertial_hz)) invalid("inertial_hz must be an integer divisor of 1000");
  std::set<std::string> names;
  for (const auto& p : sc.profiles) {
    if (!names.insert(p.name).second) invalid("duplicate profile '" + p.name + "'");
    if (!sc.inertial_hz && !valid_rate(p.inertial_hz)) invalid("profile '" + p.name + "': bad inertial_hz");
    if (!(p.gain >= 0.5 && p.gain <= 2.0)) invalid("profile '" + p.name + "': gain outside [0.5, 2]");
    if (!(p.noise_scale >= 0.0) || !(p.loc_accuracy_m > 0.0)) invalid("profile '" + p.name + "': bad noise");
    if (!(p.mount_tilt_deg >= 0.0 && p.mount_tilt_deg <= 45.0)) invalid("profile '" + p.name + "': tilt outside [0, 45]");
  }

  const NetworkIndex index(sc.network);
  std::set<std::string> ids;
  for (const auto& s : sc.semantics) {
    if (!ids.insert(s.id).second) invalid("duplicate semantic id '" + s.id + "'");
    if (!valid_point(s.a) || !valid_point(s.b)) invalid("semantic '" + s.id + "': bad coordinates");
    const bool node_kind = s.kind == SemanticKind::kRoundabout || s.kind == SemanticKind::kIntersectionTurn ||
                           s.kind == SemanticKind::kTrafficLight || s.kind == SemanticKind::kStopSign;
    if (node_kind) {
      if (!s.node_id || !sc.network.nodes().count(*s.node_id)) invalid("semantic '" + s.id + "': unknown node");
      if (s.kind == SemanticKind::kStopSign &&
          (!s.approach_from || !sc.network.nodes().count(*s.approach_from))) {
        invalid("semantic '" + s.id + "': stop sign needs a known approach_from node");
      }
    } else if (is_vehicle_kind(s.kind)) {
      for (const auto& p : {s.a, s.b}) {
        if (!index.nearest(p, 10.0, true)) invalid("semantic '" + s.id + "' is not on a road edge");
      }
    }
    const bool stepped = s.kind == SemanticKind::kUnderpass || s.kind == SemanticKind::kFootbridge;
    if (stepped && (!s.steps || *s.steps < 1)) invalid("semantic '" + s.id + "': steps required");
    if (s.steps && stepped && 2.0 * *s.steps * 0.3 >= haversine_m(s.a, s.b)) {
      invalid("semantic '" + s.id + "': stairs longer than the structure");
    }
  }

  std::set<std::string> agents;
  for (const auto& a : sc.agents) {
    if (!agents.insert(a.id).second) invalid("duplicate agent id '" + a.id + "'");
    if (!names.count(a.profile)) invalid("agent '" + a.id + "': unknown profile '" + a.profile + "'");
    if (a.route.empty()) invalid("agent '" + a.id + "': empty route");
    for (const auto& p : a.route) {
      if (!valid_point(p)) invalid("agent '" + a.id + "': bad route coordinates");
    }
    double length = 0.0;
    for (std::size_t i = 1; i < a.route.size(); ++i) length += haversine_m(a.route[i - 1], a.route[i]);
    if (length <= 0.0 && !a.duration_s) invalid("agent '" + a.id + "': a stationary agent needs duration_s");
    if (length > 0.0 && !(a.speed_mps > 0.0)) invalid("agent '" + a.id + "': speed must be positive");
    if (a.duration_s && !(*a.duration_s > 0.0)) invalid("agent '" + a.id + "': duration_s must be positive");
  }
}

nlohmann::ordered_json scenario_to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  put_opt(j, "inertial_hz", s.inertial_hz);
  j["network"] = io::network_to_json(s.network);
  j["profiles"] = nlohmann::ordered_json::array();
  for (const auto& p : s.profiles) {
    j["profiles"].push_back({{"name", p.name},
                             {"inertial_hz", p.inertial_hz},
                             {"gain", p.gain},
                             {"noise_scale", p.noise_scale},
                             {"has_gyro", p.has_gyro},
                             {"loc_accuracy_m", p.loc_accuracy_m},
                             {"mount_tilt_deg", p.mount_tilt_deg}});
  }
  j["semantics"] = nlohmann::ordered_json::array();
  for (const auto& p : s.semantics) {
    nlohmann::ordered_json e{{"id", p.id}, {"kind", kind_name(p.kind)}, {"a", point_json(p.a)}, {"b", point_json(p.b)}};
    put_opt(e, "node_id", p.node_id);
    put_opt(e, "approach_from", p.approach_from);
    put_opt(e, "steps", p.steps);
    put_opt(e, "ascending", p.ascending);
    put_opt(e, "lanes", p.lanes);
    j["semantics"].push_back(std::move(e));
  }
  j["agents"] = nlohmann::ordered_json::array();
  for (const auto& a : s.agents) {
    nlohmann::ordered_json e{{"id", a.id},     {"mode", mode_name(a.mode)}, {"profile", a.profile},
                             {"speed_mps", a.speed_mps}, {"start_ms", a.start_ms}};
    put_opt(e, "duration_s", a.duration_s);
    put_opt(e, "declared_indoor", a.declared_indoor);
    e["route"] = nlohmann::ordered_json::array();
    for (const auto& p : a.route) e["route"].push_back(point_json(p));
    j["agents"].push_back(std::move(e));
  }
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.name = j.value("name", std::string("scenario"));
    s.seed = j.value("seed", std::uint64_t{0});
    s.inertial_hz = get_opt<double>(j, "inertial_hz");
    if (j.contains("network")) s.network = io::network_from_json(j.at("network"));
    for (const auto& p : j.value("profiles", nlohmann::json::array())) {
      DeviceProfile d;
      d.name = p.at("name").get<std::string>();
      d.inertial_hz = p.value("inertial_hz", d.inertial_hz);
      d.gain = p.value("gain", d.gain);
      d.noise_scale = p.value("noise_scale", d.noise_scale);
      d.has_gyro = p.value("has_gyro", d.has_gyro);
      d.loc_accuracy_m = p.value("loc_accuracy_m", d.loc_accuracy_m);
      d.mount_tilt_deg = p.value("mount_tilt_deg", d.mount_tilt_deg);
      s.profiles.push_back(std::move(d));
    }
    for (const auto& e : j.value("semantics", nlohmann::json::array())) {
      PlacedSemantic p;
      p.id = e.at("id").get<std::string>();
      p.kind = kind_from_name(e.at("kind").get<std::string>());
      p.a = point_from(e.at("a"));
      p.b = e.contains("b") ? point_from(e.at("b")) : p.a;
      p.node_id = get_opt<std::string>(e, "node_id");
      p.approach_from = get_opt<std::string>(e, "approach_from");
      p.steps = get_opt<int>(e, "steps");
      p.ascending = get_opt<bool>(e, "ascending");
      p.lanes = get_opt<int>(e, "lanes");
      s.semantics.push_back(std::move(p));
    }
    for (const auto& e : j.value("agents", nlohmann::json::array())) {
      AgentScript a;
      a.id = e.at("id").get<std::string>();
      a.mode = mode_from(e.at("mode").get<std::string>());
      a.profile = e.at("profile").get<std::string>();
      a.speed_mps = e.value("speed_mps", a.speed_mps);
      a.start_ms = e.value("start_ms", std::int64_t{0});
      a.duration_s = get_opt<double>(e, "duration_s");
      a.declared_indoor = get_opt<bool>(e, "declared_indoor");
      for (const auto& p : e.at("route")) a.route.push_back(point_from(p));
      s.agents.push_back(std::move(a));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidScenario, std::string("malformed scenario: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidScenario) throw;
    throw Error(ErrorCode::kInvalidScenario, e.what());
  }
}

nlohmann::ordered_json truth_to_json(const GroundTruth& t) {
  nlohmann::ordered_json j;
  j["scenario"] = t.scenario;
  j["seed"] = t.seed;
  j["trace_ids"] = t.trace_ids;
  j["instances"] = nlohmann::ordered_json::array();
  for (const auto& i : t.instances) {
    nlohmann::ordered_json e{{"semantic_id", i.semantic_id},
                             {"kind", kind_name(i.kind)},
                             {"location", point_json(i.location)},
                             {"traversals", i.traversals}};
    if (i.start_location) e["start_location"] = point_json(*i.start_location);
    put_opt(e, "steps", i.steps);
    put_opt(e, "lanes", i.lanes);
    j["instances"].push_back(std::move(e));
  }
  j["spans"] = nlohmann::ordered_json::array();
  for (const auto& s : t.spans) {
    nlohmann::ordered_json e{{"trace_id", s.trace_id},     {"semantic_id", s.semantic_id},
                             {"kind", kind_name(s.kind)},  {"t_start_ms", s.t_start_ms},
                             {"t_end_ms", s.t_end_ms},     {"location", point_json(s.location)}};
    if (s.start_location) e["start_location"] = point_json(*s.start_location);
    j["spans"].push_back(std::move(e));
  }
  return j;
}

GroundTruth truth_from_json(const nlohmann::json& j) {
  try {
    GroundTruth t;
    t.scenario = j.at("scenario").get<std::string>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.trace_ids = j.at("trace_ids").get<std::vector<std::string>>();
    for (const auto& e : j.at("instances")) {
      TruthInstance i;
      i.semantic_id = e.at("semantic_id").get<std::string>();
      i.kind = kind_from_name(e.at("kind").get<std::string>());
      i.location = point_from(e.at("location"));
      if (e.contains("start_location")) i.start_location = point_from(e.at("start_location"));
      i.steps = get_opt<int>(e, "steps");
      i.lanes = get_opt<int>(e, "lanes");
      i.traversals = e.value("traversals", std::size_t{0});
      t.instances.push_back(std::move(i));
    }
    for (const auto& e : j.value("spans", nlohmann::json::array())) {
      TruthSpan s;
      s.trace_id = e.at("trace_id").get<std::string>();
      s.semantic_id = e.at("semantic_id").get<std::string>();
      s.kind = kind_from_name(e.at("kind").get<std::string>());
      s.t_start_ms = e.at("t_start_ms").get<std::int64_t>();
      s.t_end_ms = e.at("t_end_ms").get<std::int64_t>();
      s.location = point_from(e.at("location"));
      if (e.contains("start_location")) s.start_location = point_from(e.at("start_location"));
      t.spans.push_back(std::move(s));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed ground truth: ") + e.what());
  }
}

}  // namespace mapsem::sim
