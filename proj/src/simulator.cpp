#include "mapsem/simulator.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <thread>

#include "mapsem/config.hpp"
#include "mapsem/error.hpp"
#include "mapsem/network_index.hpp"

namespace mapsem::sim {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

namespace {

constexpr double kG = 9.80665;
constexpr double kPi = std::numbers::pi;
constexpr double kWheelbaseM = 2.7;
constexpr double kStairTreadM = 0.3;
constexpr double kStopLineM = 8.0;
constexpr double kOnRouteTolM = 3.0;
constexpr double kNodePassM = 25.0;
constexpr double kNodeSpanM = 30.0;
const Vec3 kEarthField{0.0, 22.0, -40.0};  // east, north, up in uT

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    }
  }
  return r;
}

// v_device = M^T v_body
Vec3 to_device(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z, m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
          m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
}

Mat3 mount_matrix(double yaw, double tilt_x, double tilt_y) {
  const double cz = std::cos(yaw), sz = std::sin(yaw);
  const double cx = std::cos(tilt_x), sx = std::sin(tilt_x);
  const double cy = std::cos(tilt_y), sy = std::sin(tilt_y);
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  return mul(rz, mul(rx, ry));
}

double quant(double x, double step) { return std::round(x / step) * step; }
Vec3 quant(const Vec3& v, double step) { return {quant(v.x, step), quant(v.y, step), quant(v.z, step)}; }

/// Arc-length parametrized polyline in a local tangent plane.
class Route {
 public:
  Route() = default;
  Route(const std::vector<LatLon>& pts, const LocalFrame& frame) {
    for (const auto& g : pts) {
      const auto p = frame.to_local(g);
      if (!p_.empty() && std::hypot(p.east_m - p_.back().east_m, p.north_m - p_.back().north_m) < 1e-6) continue;
      p_.push_back(p);
    }
    s_.assign(p_.size(), 0.0);
    for (std::size_t i = 1; i < p_.size(); ++i) {
      s_[i] = s_[i - 1] + std::hypot(p_[i].east_m - p_[i - 1].east_m, p_[i].north_m - p_[i - 1].north_m);
    }
    std::vector<double> seg;
    for (std::size_t i = 1; i < p_.size(); ++i) {
      const double h = std::atan2(p_[i].east_m - p_[i - 1].east_m, p_[i].north_m - p_[i - 1].north_m);
      seg.push_back(seg.empty() ? h : seg.back() + wrap_angle(h - seg.back()));
    }
    vh_.assign(p_.size(), seg.empty() ? 0.0 : seg.front());
    for (std::size_t i = 1; i + 1 < p_.size(); ++i) vh_[i] = 0.5 * (seg[i - 1] + seg[i]);
    if (!seg.empty()) vh_.back() = seg.back();
  }

  double length() const { return s_.empty() ? 0.0 : s_.back(); }

  EastNorth at(double s) const {
    if (p_.size() < 2) return p_.empty() ? EastNorth{} : p_.front();
    const auto [i, f] = locate(s);
    return {p_[i].east_m + f * (p_[i + 1].east_m - p_[i].east_m),
            p_[i].north_m + f * (p_[i + 1].north_m - p_[i].north_m)};
  }

  /// Unwrapped heading, clockwise from north.
  double heading(double s) const {
    if (p_.size() < 2) return 0.0;
    const auto [i, f] = locate(s);
    return vh_[i] + f * (vh_[i + 1] - vh_[i]);
  }


  /// Arc length of the nearest point to q and the distance to it.
  std::pair<double, double> project(const EastNorth& q) const {
    if (p_.size() < 2) {
      return {0.0, p_.empty() ? 1e18 : std::hypot(q.east_m - p_[0].east_m, q.north_m - p_[0].north_m)};
    }
    double best_d = 1e18, best_s = 0.0;
    for (std::size_t i = 0; i + 1 < p_.size(); ++i) {
      const double dx = p_[i + 1].east_m - p_[i].east_m, dy = p_[i + 1].north_m - p_[i].north_m;
      const double len2 = dx * dx + dy * dy;
      double t = ((q.east_m - p_[i].east_m) * dx + (q.north_m - p_[i].north_m) * dy) / len2;
      t = std::clamp(t, 0.0, 1.0);
      const double d = std::hypot(p_[i].east_m + t * dx - q.east_m, p_[i].north_m + t * dy - q.north_m);
      if (d < best_d - 1e-9) {
        best_d = d;
        best_s = s_[i] + t * (s_[i + 1] - s_[i]);
      }
    }
    return {best_s, best_d};
  }

 private:
  std::pair<std::size_t, double> locate(double s) const {
    s = std::clamp(s, 0.0, length());
    auto it = std::upper_bound(s_.begin(), s_.end(), s);
    std::size_t i = it == s_.begin() ? 0 : static_cast<std::size_t>(it - s_.begin()) - 1;
    i = std::min(i, p_.size() - 2);
    return {i, (s - s_[i]) / (s_[i + 1] - s_[i])};
  }

  std::vector<EastNorth> p_;
  std::vector<double> s_;
  std::vector<double> vh_;
};

enum class Zone { kTunnel, kBridge, kRailway, kUnderpassInterior, kStairsUp, kStairsDown, kEscalator };

/// Properties shared by every agent that meets a semantic.
struct SemParams {
  double amp{1.0};
  double grade{0.05};
  double freq{4.0};
  double decay_s{0.12};
  std::array<double, 3> phase{};
  std::array<double, 3> lambda{2.3, 4.1, 7.7};
};

struct ZoneSpan {
  double s0{0.0};
  double s1{0.0};
  Zone zone{Zone::kTunnel};
  std::size_t sem{0};
};

struct Hit {
  double s{0.0};
  SemanticKind kind{SemanticKind::kBump};
  std::size_t sem{0};
};

struct PlannedStop {
  double s{0.0};
  enum class Why { kStopSign, kRedLight, kCurb } why{Why::kStopSign};
};

struct Passage {
  std::size_t sem{0};
  double s0{0.0};
  double s1{0.0};
  LatLon location{};
  std::optional<LatLon> start_location;
};

struct AgentPlan {
  Route route;
  std::vector<ZoneSpan> zones;
  std::vector<Hit> hits;
  std::vector<PlannedStop> stops;
  std::vector<Passage> passages;
};

struct Plan {
  LocalFrame frame;
  std::vector<SemParams> params;
  std::vector<AgentPlan> agents;
};

LatLon midpoint(const LocalFrame& f, const LatLon& a, const LatLon& b) {
  const auto p = f.to_local(a), q = f.to_local(b);
  return f.to_geo({0.5 * (p.east_m + q.east_m), 0.5 * (p.north_m + q.north_m)});
}

bool is_node_kind(SemanticKind k) {
  return k == SemanticKind::kRoundabout || k == SemanticKind::kIntersectionTurn || k == SemanticKind::kTrafficLight;
}

bool is_point_kind(SemanticKind k) { return k == SemanticKind::kBump || k == SemanticKind::kCatsEye; }

LatLon scenario_origin(const Scenario& sc) {
  if (!sc.network.nodes().empty()) return sc.network.nodes().begin()->second;
  for (const auto& a : sc.agents) {
    if (!a.route.empty()) return a.route.front();
  }
  return {};
}

const DeviceProfile& profile_of(const Scenario& sc, const std::string& name) {
  for (const auto& p : sc.profiles) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCode::kInvalidScenario, "unknown profile '" + name + "'");
}

SemParams make_params(std::uint64_t seed, std::size_t index, SemanticKind kind) {
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(0x5e3a'0000'0000ULL + index)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SemParams p;
  for (auto& ph : p.phase) ph = 2.0 * kPi * u(rng);
  for (auto& l : p.lambda) l *= 0.8 + 0.4 * u(rng);
  switch (kind) {
    case SemanticKind::kBump: p.amp = 1.2 + 0.3 * u(rng); p.freq = 4.0 + 2.0 * u(rng); p.decay_s = 0.08; break;
    case SemanticKind::kCatsEye: p.amp = 1.6 + 0.6 * u(rng); p.freq = 4.0 + 3.0 * u(rng); p.decay_s = 0.15; break;
    case SemanticKind::kRailwayCrossing: p.amp = 0.10 + 0.05 * u(rng); break;
    case SemanticKind::kBridge: p.grade = 0.045 + 0.025 * u(rng); break;
    case SemanticKind::kTunnel:
    case SemanticKind::kUnderpass: p.amp = 3.5 + 1.5 * u(rng); break;
    case SemanticKind::kEscalator: p.amp = 2.5 + 1.0 * u(rng); break;
    default: break;
  }
  return p;
}

/// Incident edge whose far end best matches a bearing out of the node.
std::string approach_key(const RoadNetwork& net, const std::string& node, double bearing) {
  std::string best;
  double best_diff = 1e9;
  for (auto e : net.incident_edges(node)) {
    const auto& edge = net.edges()[e];
    if (edge.kind != EdgeKind::kRoad) continue;
    const std::string& other = edge.from == node ? edge.to : edge.from;
    const double d = std::abs(wrap_angle(bearing_rad(net.node(node), net.node(other)) - bearing));
    if (d < best_diff) {
      best_diff = d;
      best = other;
    }
  }
  return best;
}

Plan make_plan(const Scenario& sc) {
  Plan plan;
  plan.frame = LocalFrame(scenario_origin(sc));
  const auto& f = plan.frame;
  for (std::size_t i = 0; i < sc.semantics.size(); ++i) plan.params.push_back(make_params(sc.seed, i, sc.semantics[i].kind));

  // (light index, approach) -> agents in index order
  std::map<std::pair<std::size_t, std::string>, std::vector<std::size_t>> light_queue;
  std::vector<std::vector<std::pair<std::size_t, std::string>>> agent_lights(sc.agents.size());

  for (std::size_t ai = 0; ai < sc.agents.size(); ++ai) {
    AgentPlan ap;
    ap.route = Route(sc.agents[ai].route, f);
    const Route& r = ap.route;
    const double len = r.length();
    if (len <= 0.0) {
      plan.agents.push_back(std::move(ap));
      continue;
    }
    for (std::size_t si = 0; si < sc.semantics.size(); ++si) {
      const auto& sem = sc.semantics[si];
      const auto kind = sem.kind;
      if (is_node_kind(kind)) {
        const LatLon node = sc.network.node(*sem.node_id);
        const auto [sn, d] = r.project(f.to_local(node));
        const double reach = kind == SemanticKind::kTrafficLight ? 12.0 : kNodePassM;
        if (d > reach || sn <= 0.0 || sn >= len) continue;
        ap.passages.push_back({si, std::max(0.0, sn - kNodeSpanM), std::min(len, sn + kNodeSpanM), node, {}});
        if (kind == SemanticKind::kTrafficLight) {
          const auto before = f.to_geo(r.at(sn - 20.0));
          const std::string key = approach_key(sc.network, *sem.node_id, bearing_rad(node, before));
          light_queue[{si, key}].push_back(ai);
          agent_lights[ai].push_back({si, key});
          ap.stops.push_back({sn - kStopLineM, PlannedStop::Why::kRedLight});  // pruned below if green
        }
        continue;
      }
      if (kind == SemanticKind::kStopSign) {
        const auto [sa, d] = r.project(f.to_local(sem.a));
        if (d > kOnRouteTolM) continue;
        const LatLon node = sc.network.node(*sem.node_id);
        const auto [sn, dn] = r.project(f.to_local(node));
        if (dn > kNodePassM || sn <= sa) continue;
        const auto ahead = f.to_geo(r.at(sa + 1.0));
        if (std::abs(wrap_angle(bearing_rad(sem.a, ahead) - bearing_rad(sem.a, node))) > 30.0 * kDegToRad) continue;
        ap.stops.push_back({sa, PlannedStop::Why::kStopSign});
        ap.passages.push_back({si, std::max(0.0, sa - kNodeSpanM), std::min(len, sn + 10.0), sem.a, {}});
        continue;
      }
      const auto [sa, da] = r.project(f.to_local(sem.a));
      if (da > kOnRouteTolM) continue;
      if (is_point_kind(kind)) {
        if (sa <= 0.0 || sa >= len) continue;
        ap.hits.push_back({sa, kind, si});
        ap.passages.push_back({si, sa, std::min(len, sa + kWheelbaseM), sem.a, {}});
        continue;
      }
      const auto [sb, db] = r.project(f.to_local(sem.b));
      if (db > kOnRouteTolM || std::abs(sb - sa) < 0.5) continue;
      const bool forward = sb > sa;
      const double s0 = std::min(sa, sb), s1 = std::max(sa, sb);
      Passage pass{si, s0, s1, midpoint(f, sem.a, sem.b), {}};
      const double stairs_m = sem.steps.value_or(0) * kStairTreadM;
      switch (kind) {
        case SemanticKind::kTunnel: ap.zones.push_back({s0, s1, Zone::kTunnel, si}); break;
        case SemanticKind::kBridge:
          ap.zones.push_back({s0, s1, Zone::kBridge, si});
          pass.location = forward ? sem.b : sem.a;
          pass.start_location = forward ? sem.a : sem.b;
          break;
        case SemanticKind::kRailwayCrossing: ap.zones.push_back({s0, s1, Zone::kRailway, si}); break;
        case SemanticKind::kUnderpass:
          ap.zones.push_back({s0, s0 + stairs_m, Zone::kStairsDown, si});
          ap.zones.push_back({s0 + stairs_m, s1 - stairs_m, Zone::kUnderpassInterior, si});
          ap.zones.push_back({s1 - stairs_m, s1, Zone::kStairsUp, si});
          break;
        case SemanticKind::kFootbridge:
          ap.zones.push_back({s0, s0 + stairs_m, Zone::kStairsUp, si});
          ap.zones.push_back({s1 - stairs_m, s1, Zone::kStairsDown, si});
          break;
        case SemanticKind::kStairs: {
          const bool up = sem.ascending.value_or(true) == forward;
          ap.zones.push_back({s0, s1, up ? Zone::kStairsUp : Zone::kStairsDown, si});
          break;
        }
        case SemanticKind::kEscalator: ap.zones.push_back({s0, s1, Zone::kEscalator, si}); break;
        case SemanticKind::kCrosswalk: ap.stops.push_back({s0 - 0.3, PlannedStop::Why::kCurb}); break;
        default: break;
      }
      ap.passages.push_back(pass);
    }
    plan.agents.push_back(std::move(ap));
  }

  // Signals: within each approach, two of every five consecutive arrivals
  // meet a red phase. The cycle offset is fixed per approach.
  std::set<std::pair<std::size_t, std::size_t>> red;  // (agent, light)
  for (const auto& [key, agents] : light_queue) {
    const std::uint64_t h = splitmix64(sc.seed ^ fnv1a64(std::to_string(key.first) + "/" + key.second));
    const std::size_t offset = h % 5;
    for (std::size_t rank = 0; rank < agents.size(); ++rank) {
      if ((rank + offset) % 5 < 2) red.insert({agents[rank], key.first});
    }
  }
  for (std::size_t ai = 0; ai < plan.agents.size(); ++ai) {
    auto& ap = plan.agents[ai];
    std::vector<PlannedStop> kept;
    std::size_t light_i = 0;
    for (const auto& st : ap.stops) {
      if (st.why == PlannedStop::Why::kRedLight) {
        const auto light = agent_lights[ai][light_i++].first;
        if (!red.count({ai, light})) continue;
      }
      if (st.s > 0.0) kept.push_back(st);
    }
    std::sort(kept.begin(), kept.end(), [](const PlannedStop& a, const PlannedStop& b) { return a.s < b.s; });
    ap.stops = std::move(kept);
    std::sort(ap.hits.begin(), ap.hits.end(), [](const Hit& a, const Hit& b) { return a.s < b.s; });
  }
  return plan;
}

}  // namespace

namespace {

constexpr double kRingLifeS = 1.0;

struct Ring {
  double t0{0.0};
  SemanticKind kind{SemanticKind::kBump};
  const SemParams* p{nullptr};
};

/// Gradual onset over `ramp` metres at both ends of a span.
double span_envelope(double s, double s0, double s1, double ramp) {
  if (s <= s0 || s >= s1) return 0.0;
  return std::min({1.0, (s - s0) / ramp, (s1 - s) / ramp});
}

double spatial_wave(const SemParams& p, double s, int axis) {
  double acc = 0.0;
  for (int k = 0; k < 3; ++k) {
    acc += (1.0 - 0.25 * k) * std::sin(2.0 * kPi * s / p.lambda[static_cast<std::size_t>(k)] +
                                       p.phase[static_cast<std::size_t>(k)] + 1.7 * axis);
  }
  return acc / 1.6;
}

std::pair<Trace, std::vector<TruthSpan>> run_agent(const Scenario& sc, const Plan& plan, std::size_t index) {
  const AgentScript& script = sc.agents[index];
  const AgentPlan& ap = plan.agents[index];
  const DeviceProfile& prof = profile_of(sc, script.profile);
  const double hz = sc.inertial_hz.value_or(prof.inertial_hz);
  const double dt = 1.0 / hz;
  const auto per_second = static_cast<std::int64_t>(std::llround(hz));
  const bool vehicle = script.mode == AgentMode::kVehicle;
  const Route& route = ap.route;
  const double len = route.length();
  const LocalFrame& frame = plan.frame;

  std::mt19937_64 rng(splitmix64(sc.seed ^ splitmix64(index + 1)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unif(rng); };

  // Device placement and per-agent constants.
  const double tilt = prof.mount_tilt_deg * kDegToRad;
  const double yaw = vehicle ? uniform(-kPi, kPi) : uniform(-0.3, 0.3);
  const Mat3 mount = mount_matrix(yaw, uniform(-tilt, tilt), uniform(-tilt, tilt));
  const double ns = prof.noise_scale;
  const double sd_accel = (vehicle ? 0.08 : 0.05) * ns;
  const double sd_grav = 0.02 * ns;
  const double sd_gyro = 0.008 * ns;
  const double sd_mag = 0.4 * ns;
  const double sd_az = 2.0 * kDegToRad * ns;
  const Vec3 gyro_bias{0.003 * gauss(rng), 0.003 * gauss(rng), 0.003 * gauss(rng)};
  const double accuracy = quant(prof.loc_accuracy_m * uniform(0.8, 1.2), 0.1);
  const double loc_sd = accuracy / std::sqrt(2.0);
  const double loc_rho = std::exp(-1.0 / 30.0);
  EastNorth loc_err{loc_sd * gauss(rng), loc_sd * gauss(rng)};
  const double rss_base = uniform(-85.0, -65.0);
  const double rss_rho = std::exp(-1.0 / 30.0);
  double rss_slow = 3.0 * gauss(rng);
  const double stride = uniform(0.65, 0.75);
  const double step_amp = uniform(1.6, 2.4);

  // Speed caps on a fine grid: curvature for vehicles, structures for
  // pedestrians, then a backward pass so braking stays gentle.
  const double ds = 0.5;
  const double decel = vehicle ? 2.0 : 0.8;
  const double accel_max = vehicle ? 1.5 : 0.8;
  const auto grid_n = static_cast<std::size_t>(std::ceil(len / ds)) + 2;
  std::vector<double> cap(grid_n, script.speed_mps);
  for (std::size_t g = 0; g < grid_n; ++g) {
    const double s = static_cast<double>(g) * ds;
    if (vehicle) {
      const double kappa = std::abs(route.heading(s + 4.0) - route.heading(s - 4.0)) / 8.0;
      if (kappa > 1e-6) cap[g] = std::min(cap[g], std::max(3.0, std::sqrt(2.0 / kappa)));
    } else {
      for (const auto& z : ap.zones) {
        if (s >= z.s0 - 0.5 && s <= z.s1 + 0.5 &&
            (z.zone == Zone::kStairsUp || z.zone == Zone::kStairsDown || z.zone == Zone::kEscalator)) {
          cap[g] = std::min(cap[g], 0.5);
        }
      }
    }
  }
  for (std::size_t g = grid_n - 1; g-- > 0;) cap[g] = std::min(cap[g], std::sqrt(cap[g + 1] * cap[g + 1] + 2.0 * decel * ds));
  auto cap_at = [&](double s) { return cap[std::min(grid_n - 1, static_cast<std::size_t>(std::max(0.0, s) / ds))]; };

  std::vector<double> dwell_for(ap.stops.size());
  for (std::size_t k = 0; k < ap.stops.size(); ++k) {
    switch (ap.stops[k].why) {
      case PlannedStop::Why::kStopSign: dwell_for[k] = uniform(1.0, 2.5); break;
      case PlannedStop::Why::kRedLight: dwell_for[k] = uniform(5.0, 15.0); break;
      case PlannedStop::Why::kCurb: dwell_for[k] = unif(rng) < 0.5 ? uniform(2.0, 8.0) : 0.0; break;
    }
  }

  Trace trace;
  trace.trace_id = sc.name + "/" + script.id;
  trace.declared_indoor = script.declared_indoor;
  std::vector<TruthSpan> spans;
  std::vector<std::optional<std::int64_t>> pass_t0(ap.passages.size()), pass_t1(ap.passages.size());
  std::vector<Ring> rings;
  std::size_t next_hit = 0, next_stop = 0;
  double dwell_left = 0.0;
  double s = 0.0;
  double v = std::min(script.speed_mps, cap_at(0.0));
  if (len <= 0.0) v = 0.0;
  double phase = 0.0;
  double prev_pitch = 0.0;
  EastNorth fix = route.at(0.0);
  double rss = rss_base;
  std::string cell = "cell-0";
  const double max_t = script.duration_s.value_or(1e12);

  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (t > max_t || (len > 0.0 && s >= len)) break;
    const std::int64_t t_ms = script.start_ms + static_cast<std::int64_t>(std::llround(t * 1000.0));

    // Longitudinal dynamics for the next step.
    double v_next = v;
    if (dwell_left > 0.0) {
      dwell_left -= dt;
      v_next = 0.0;
      if (dwell_left <= 0.0) ++next_stop;
    } else if (len > 0.0) {
      double target = std::min(script.speed_mps, cap_at(s));
      while (next_stop < ap.stops.size() && dwell_for[next_stop] <= 0.0 && ap.stops[next_stop].s <= s) ++next_stop;
      if (next_stop < ap.stops.size() && dwell_for[next_stop] > 0.0) {
        const double d = ap.stops[next_stop].s - s;
        if (d <= 0.05) {
          dwell_left = dwell_for[next_stop];
          target = 0.0;
          v = 0.0;
        } else {
          target = std::min(target, std::sqrt(2.0 * decel * d));
        }
      }
      v_next = v < target ? std::min(target, v + accel_max * dt) : target;
    }
    const double a_long = (v_next - v) / dt;

    // Events that fire at this position.
    while (next_hit < ap.hits.size() && ap.hits[next_hit].s <= s) {
      const auto& h = ap.hits[next_hit];
      rings.push_back({t, h.kind, &plan.params[h.sem]});
      if (h.kind == SemanticKind::kBump) rings.push_back({t + kWheelbaseM / std::max(v, 0.5), h.kind, &plan.params[h.sem]});
      ++next_hit;
    }
    for (std::size_t p = 0; p < ap.passages.size(); ++p) {
      if (!pass_t0[p] && s >= ap.passages[p].s0) pass_t0[p] = t_ms;
      if (!pass_t1[p] && s >= ap.passages[p].s1) pass_t1[p] = t_ms;
    }

    // Kinematic state.
    const double psi = route.heading(s);
    // Drivers ease into curvature changes over about a second of travel.
    const double ease = vehicle ? std::max(4.0, v) : 1.0;
    const double psi_dot = (route.heading(s + ease) - route.heading(s - ease)) / (2.0 * ease) * v;
    double pitch = 0.0;
    Vec3 vib_both{}, vib_accel{}, mag_dist{};
    double rss_offset = 0.0;
    Zone ped_zone = Zone::kTunnel;
    bool in_ped_zone = false;
    for (const auto& z : ap.zones) {
      if (s < z.s0 - 3.0 || s > z.s1 + 3.0) continue;
      const SemParams& p = plan.params[z.sem];
      const bool inside = s >= z.s0 && s <= z.s1;
      switch (z.zone) {
        case Zone::kTunnel: {
          const double env = span_envelope(s, z.s0, z.s1, 2.0);
          mag_dist.x += env * p.amp * spatial_wave(p, s, 0);
          rss_offset = std::min(rss_offset, -22.0 * span_envelope(s, z.s0 - 1.5, z.s1 + 1.5, 3.0));
          break;
        }
        case Zone::kUnderpassInterior: {
          const double env = span_envelope(s, z.s0, z.s1, 1.5);
          const double temporal = 0.6 * std::sin(2.0 * kPi * 1.3 * t + p.phase[0]);
          mag_dist.x += env * p.amp * (spatial_wave(p, s, 0) + temporal);
          mag_dist.y += env * p.amp * (spatial_wave(p, s, 1) - temporal);
          rss_offset = std::min(rss_offset, -22.0 * span_envelope(s, z.s0 - 1.0, z.s1 + 1.0, 2.0));
          break;
        }
        case Zone::kBridge:
          if (inside) {
            const double u = (s - z.s0) / (z.s1 - z.s0);
            pitch = std::atan(p.grade * std::sin(2.0 * kPi * u));
          }
          break;
        case Zone::kRailway:
          if (inside) {
            // Truncated so the gravity channel stays within its valid norm.
            vib_both.y += p.amp * std::clamp(gauss(rng), -3.0, 3.0);
            vib_both.z += p.amp * std::clamp(gauss(rng), -3.0, 3.0);
          }
          break;
        case Zone::kEscalator:
          if (inside) {
            const double hum = std::sin(2.0 * kPi * 2.1 * t + p.phase[0]) + 0.6 * std::sin(2.0 * kPi * 3.7 * t + p.phase[1]);
            mag_dist.x += p.amp * (hum + 0.5 * spatial_wave(p, s, 0));
            mag_dist.y += p.amp * (0.8 * hum + 0.5 * spatial_wave(p, s, 1));
            ped_zone = z.zone;
            in_ped_zone = true;
          }
          break;
        case Zone::kStairsUp:
        case Zone::kStairsDown:
          if (inside) {
            ped_zone = z.zone;
            in_ped_zone = true;
          }
          break;
      }
    }
    const double pitch_dot = k == 0 ? 0.0 : (pitch - prev_pitch) / dt;
    prev_pitch = pitch;

    for (const auto& r : rings) {
      const double tau = t - r.t0;
      if (tau < 0.0 || tau > kRingLifeS) continue;
      const double env = r.p->amp * std::exp(-tau / r.p->decay_s);
      if (r.kind == SemanticKind::kBump) {
        vib_both.y += env * std::sin(2.0 * kPi * r.p->freq * tau);
        vib_both.z += 0.8 * env * std::sin(2.0 * kPi * r.p->freq * tau + 1.1);
      } else {
        vib_accel.x += env * std::sin(2.0 * kPi * r.p->freq * tau);
      }
    }
    std::erase_if(rings, [&](const Ring& r) { return t - r.t0 > kRingLifeS; });

    // Body frame: X right, Y forward, Z up.
    const double sp = std::sin(psi), cp = std::cos(psi), st = std::sin(pitch), ct = std::cos(pitch);
    const Vec3 bx{cp, -sp, 0.0}, by{sp * ct, cp * ct, st}, bz{-sp * st, -cp * st, ct};
    auto to_body = [&](const Vec3& w) { return Vec3{dot(w, bx), dot(w, by), dot(w, bz)}; };
    const Vec3 up{0.0, st, ct};
    Vec3 lin{v * psi_dot, a_long, 0.0};

    if (!vehicle && v > 0.05 && !(in_ped_zone && ped_zone == Zone::kEscalator)) {
      const bool stairs = in_ped_zone && (ped_zone == Zone::kStairsUp || ped_zone == Zone::kStairsDown);
      phase += v / (stairs ? kStairTreadM : stride) * dt;
      double amp = step_amp * std::min(1.0, v / 0.4);
      if (stairs) amp *= ped_zone == Zone::kStairsDown ? 1.8 : 1.15;
      lin.z += amp * std::sin(2.0 * kPi * phase);
      lin.y += 0.3 * amp * std::cos(2.0 * kPi * phase);
      lin.x += 0.2 * amp * std::sin(kPi * phase);
    }

    const Vec3 n_acc{sd_accel * gauss(rng), sd_accel * gauss(rng), sd_accel * gauss(rng)};
    const Vec3 n_grav{sd_grav * gauss(rng), sd_grav * gauss(rng), sd_grav * gauss(rng)};
    const Vec3 n_gyro{sd_gyro * gauss(rng), sd_gyro * gauss(rng), sd_gyro * gauss(rng)};
    const Vec3 n_mag{sd_mag * gauss(rng), sd_mag * gauss(rng), sd_mag * gauss(rng)};

    SensorSample smp;
    smp.timestamp_ms = t_ms;
    smp.accel = quant(prof.gain * to_device(mount, kG * up + lin + vib_both + vib_accel + n_acc), 1e-4);
    smp.gravity = quant(to_device(mount, kG * up + prof.gain * (vib_both + n_grav)), 1e-4);
    if (prof.has_gyro) {
      smp.gyro = quant(prof.gain * to_device(mount, Vec3{pitch_dot, 0.0, -psi_dot} + n_gyro) + gyro_bias, 1e-5);
    }
    smp.magnet = quant(prof.gain * to_device(mount, to_body(kEarthField) + mag_dist + n_mag), 1e-4);

    // Orientation of the device y axis in the world.
    const Vec3 dy_body{mount[0][1], mount[1][1], mount[2][1]};
    const Vec3 dx_body{mount[0][0], mount[1][0], mount[2][0]};
    const Vec3 dy_world = dy_body.x * bx + dy_body.y * by + dy_body.z * bz;
    const Vec3 dx_world = dx_body.x * bx + dx_body.y * by + dx_body.z * bz;
    const double az = wrap_angle(std::atan2(dy_world.x, dy_world.y) + sd_az * gauss(rng));
    smp.orientation = Orientation{quant(az, 1e-5), quant(std::asin(std::clamp(dy_world.z, -1.0, 1.0)), 1e-5),
                                  quant(std::asin(std::clamp(-dx_world.z, -1.0, 1.0)), 1e-5)};

    // Location and cellular readings refresh once per second.
    if (k % per_second == 0) {
      loc_err.east_m = loc_rho * loc_err.east_m + std::sqrt(1.0 - loc_rho * loc_rho) * loc_sd * gauss(rng);
      loc_err.north_m = loc_rho * loc_err.north_m + std::sqrt(1.0 - loc_rho * loc_rho) * loc_sd * gauss(rng);
      const auto truth = route.at(s);
      fix = {truth.east_m + loc_err.east_m, truth.north_m + loc_err.north_m};
      rss_slow = rss_rho * rss_slow + std::sqrt(1.0 - rss_rho * rss_rho) * 3.0 * gauss(rng);
      rss = std::clamp(std::round(rss_base + rss_slow + 1.0 * gauss(rng) + rss_offset), kRssMinDbm + 1.0, kRssMaxDbm - 1.0);
      cell = "cell-" + std::to_string(static_cast<int>(s / 1000.0));
      smp.serving_cell = cell;
      smp.serving_rss_dbm = rss;
    }
    const LatLon g = frame.to_geo(fix);
    smp.lat_deg = quant(g.lat_deg, 1e-7);
    smp.lon_deg = quant(g.lon_deg, 1e-7);
    smp.loc_accuracy_m = accuracy;
    trace.samples.push_back(std::move(smp));

    s += v_next * dt;
    v = v_next;
    if (len <= 0.0) s = 0.0;
  }

  for (std::size_t p = 0; p < ap.passages.size(); ++p) {
    if (!pass_t0[p] || !pass_t1[p]) continue;
    const auto& pa = ap.passages[p];
    const auto& sem = sc.semantics[pa.sem];
    spans.push_back({trace.trace_id, sem.id, sem.kind, *pass_t0[p], *pass_t1[p], pa.location, pa.start_location});
  }
  std::sort(spans.begin(), spans.end(), [](const TruthSpan& a, const TruthSpan& b) {
    return std::tie(a.t_start_ms, a.semantic_id) < std::tie(b.t_start_ms, b.semantic_id);
  });
  return {std::move(trace), std::move(spans)};
}

}  // namespace

std::pair<Trace, std::vector<TruthSpan>> simulate_agent(const Scenario& scenario, std::size_t agent) {
  validate_scenario(scenario);
  if (agent >= scenario.agents.size()) throw Error(ErrorCode::kInvalidScenario, "agent index out of range");
  return run_agent(scenario, make_plan(scenario), agent);
}

GroundTruth assemble_truth(const Scenario& scenario, std::vector<TruthSpan> spans) {
  GroundTruth gt;
  gt.scenario = scenario.name;
  gt.seed = scenario.seed;
  for (const auto& a : scenario.agents) gt.trace_ids.push_back(scenario.name + "/" + a.id);
  std::map<std::string, std::size_t> first_span;
  std::map<std::string, std::size_t> count;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    first_span.emplace(spans[i].semantic_id, i);
    ++count[spans[i].semantic_id];
  }
  for (const auto& sem : scenario.semantics) {
    const auto it = first_span.find(sem.id);
    if (it == first_span.end()) continue;
    const auto& sp = spans[it->second];
    TruthInstance inst{sem.id, sem.kind, sp.location, sp.start_location, sem.steps, sem.lanes, count[sem.id]};
    gt.instances.push_back(std::move(inst));
  }
  gt.spans = std::move(spans);
  return gt;
}

Simulation simulate(const Scenario& scenario) {
  validate_scenario(scenario);
  const Plan plan = make_plan(scenario);
  const std::size_t n = scenario.agents.size();
  std::vector<std::pair<Trace, std::vector<TruthSpan>>> out(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) out[i] = run_agent(scenario, plan, i);
  };
  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  Simulation sim;
  std::vector<TruthSpan> spans;
  for (auto& [trace, sp] : out) {
    sim.traces.push_back(std::move(trace));
    spans.insert(spans.end(), std::make_move_iterator(sp.begin()), std::make_move_iterator(sp.end()));
  }
  sim.truth = assemble_truth(scenario, std::move(spans));
  return sim;
}

}  // namespace mapsem::sim
