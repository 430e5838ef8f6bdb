#include "mapsem/trace_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace mapsem::io {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json vec_json(const Vec3& v) { return ordered_json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kParse, std::string(field) + " must be a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
T required(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw Error(ErrorCode::kParse, std::string("missing field ") + field);
  return it->get<T>();
}

}  // namespace

ordered_json sample_to_json(const SensorSample& s) {
  ordered_json j;
  j["timestamp_ms"] = s.timestamp_ms;
  if (s.accel) j["accel"] = vec_json(*s.accel);
  if (s.gyro) j["gyro"] = vec_json(*s.gyro);
  if (s.magnet) j["magnet"] = vec_json(*s.magnet);
  if (s.gravity) j["gravity"] = vec_json(*s.gravity);
  if (s.orientation) {
    j["orientation"] = ordered_json::array({s.orientation->azimuth_rad, s.orientation->pitch_rad, s.orientation->roll_rad});
  }
  if (s.serving_cell) j["serving_cell"] = *s.serving_cell;
  if (s.serving_rss_dbm) j["serving_rss_dbm"] = *s.serving_rss_dbm;
  if (!s.neighbor_cells.empty()) {
    ordered_json cells = ordered_json::array();
    for (const auto& c : s.neighbor_cells) cells.push_back(ordered_json{{"cell_id", c.cell_id}, {"rss_dbm", c.rss_dbm}});
    j["neighbor_cells"] = std::move(cells);
  }
  j["lat_deg"] = s.lat_deg;
  j["lon_deg"] = s.lon_deg;
  j["loc_accuracy_m"] = s.loc_accuracy_m;
  return j;
}

SensorSample sample_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "line is not a JSON object");
  SensorSample s;
  s.timestamp_ms = required<std::int64_t>(j, "timestamp_ms");
  if (auto it = j.find("accel"); it != j.end()) s.accel = vec_from(*it, "accel");
  if (auto it = j.find("gyro"); it != j.end()) s.gyro = vec_from(*it, "gyro");
  if (auto it = j.find("magnet"); it != j.end()) s.magnet = vec_from(*it, "magnet");
  if (auto it = j.find("gravity"); it != j.end()) s.gravity = vec_from(*it, "gravity");
  if (auto it = j.find("orientation"); it != j.end()) {
    const Vec3 o = vec_from(*it, "orientation");
    s.orientation = Orientation{o.x, o.y, o.z};
  }
  if (auto it = j.find("serving_cell"); it != j.end()) s.serving_cell = it->get<std::string>();
  if (auto it = j.find("serving_rss_dbm"); it != j.end()) s.serving_rss_dbm = it->get<double>();
  if (auto it = j.find("neighbor_cells"); it != j.end()) {
    for (const auto& c : *it) {
      s.neighbor_cells.push_back({required<std::string>(c, "cell_id"), required<double>(c, "rss_dbm")});
    }
  }
  s.lat_deg = required<double>(j, "lat_deg");
  s.lon_deg = required<double>(j, "lon_deg");
  s.loc_accuracy_m = required<double>(j, "loc_accuracy_m");
  return s;
}

void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& s : trace.samples) {
    ordered_json line;
    line["trace_id"] = trace.trace_id;
    if (trace.declared_indoor) line["declared_indoor"] = *trace.declared_indoor;
    const ordered_json fields = sample_to_json(s);
    for (const auto& el : fields.items()) line[el.key()] = el.value();
    out << line.dump() << '\n';
  }
}

void write_traces(std::ostream& out, const std::vector<Trace>& traces) {
  for (const auto& t : traces) write_trace(out, t);
}

std::vector<Trace> read_traces(std::istream& in, const std::string& source, SampleLines* lines) {
  std::vector<Trace> traces;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      SensorSample s = sample_from_json(j);
      const std::string id = required<std::string>(j, "trace_id");
      auto [it, inserted] = index.try_emplace(id, traces.size());
      if (inserted) {
        traces.push_back(Trace{id, {}, std::nullopt});
        if (lines) lines->emplace_back();
      }
      if (lines) (*lines)[it->second].push_back(line_no);
      Trace& t = traces[it->second];
      if (auto ind = j.find("declared_indoor"); ind != j.end() && !t.declared_indoor) {
        t.declared_indoor = ind->get<bool>();
      }
      t.samples.push_back(std::move(s));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return traces;
}

std::vector<Trace> read_traces_file(const std::string& path, SampleLines* lines) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_traces(in, path, lines);
}

std::string edge_kind_name(EdgeKind kind) { return kind == EdgeKind::kRailway ? "railway" : "road"; }

ordered_json network_to_json(const RoadNetwork& net) {
  ordered_json nodes = ordered_json::array();
  for (const auto& [id, p] : net.nodes()) {
    nodes.push_back(ordered_json{{"id", id}, {"lat_deg", p.lat_deg}, {"lon_deg", p.lon_deg}});
  }
  ordered_json edges = ordered_json::array();
  for (const auto& e : net.edges()) {
    edges.push_back(ordered_json{{"from", e.from}, {"to", e.to}, {"kind", edge_kind_name(e.kind)}});
  }
  return ordered_json{{"nodes", nodes}, {"edges", edges}};
}

RoadNetwork network_from_json(const json& j) {
  try {
    std::map<std::string, LatLon> nodes;
    for (const auto& n : j.at("nodes")) {
      nodes[n.at("id").get<std::string>()] = {n.at("lat_deg").get<double>(), n.at("lon_deg").get<double>()};
    }
    std::vector<RoadEdge> edges;
    for (const auto& e : j.at("edges")) {
      const std::string kind = e.value("kind", "road");
      if (kind != "road" && kind != "railway") throw Error(ErrorCode::kParse, "unknown edge kind " + kind);
      edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                       kind == "railway" ? EdgeKind::kRailway : EdgeKind::kRoad});
    }
    return RoadNetwork(std::move(nodes), std::move(edges));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("road network: ") + e.what());
  }
}

RoadNetwork read_network_file(const std::string& path) {
  try {
    return network_from_json(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mapsem::io
