#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "mapsem/simulator.hpp"

namespace mapsem::sim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPerKind = 30;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

EastNorth forward(double h) { return {std::sin(h), std::cos(h)}; }
EastNorth right_of(double h) { return {std::cos(h), -std::sin(h)}; }
EastNorth add(EastNorth a, EastNorth b, double k = 1.0) { return {a.east_m + k * b.east_m, a.north_m + k * b.north_m}; }

/// Path builder: straight runs and circular arcs, sampled every metre or so.
/// Positive arc angles turn right (clockwise).
struct Turtle {
  EastNorth p{};
  double h{0.0};
  std::vector<EastNorth> pts;

  Turtle(EastNorth start, double heading) : p(start), h(heading), pts{start} {}

  void straight(double len) {
    const int n = std::max(1, static_cast<int>(std::ceil(len / 2.0)));
    const EastNorth start = p;
    for (int i = 1; i <= n; ++i) pts.push_back(add(start, forward(h), len * i / n));
    p = pts.back();
  }

  void arc(double radius, double angle) {
    const double sgn = angle > 0 ? 1.0 : -1.0;
    const EastNorth centre = add(p, right_of(h), sgn * radius);
    const int n = std::max(2, static_cast<int>(std::ceil(std::abs(angle) * radius / 1.0)));
    const double h0 = h;
    for (int i = 1; i <= n; ++i) {
      const double hi = h0 + angle * i / n;
      pts.push_back(add(centre, right_of(hi), -sgn * radius));
    }
    h = h0 + angle;
    p = pts.back();
  }

  /// Centre of the arc that `arc(radius, angle)` would draw from here.
  EastNorth arc_centre(double radius, double angle) const { return add(p, right_of(h), (angle > 0 ? 1.0 : -1.0) * radius); }
};

std::vector<LatLon> to_geo(const LocalFrame& f, const std::vector<EastNorth>& pts) {
  std::vector<LatLon> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(f.to_geo(p));
  return out;
}

std::vector<DeviceProfile> profiles(bool pedestrian) {
  const double base = pedestrian ? 2.0 : 3.0;
  return {
      {"phone-a", 50.0, 1.0, 1.0, true, base, 20.0},
      {"phone-b", 25.0, 0.8, 1.3, true, base + 0.5, 30.0},
      {"phone-c", 20.0, 1.25, 1.6, true, base + 1.0, 35.0},
  };
}

struct NetBuilder {
  std::map<std::string, LatLon> nodes;
  std::vector<RoadEdge> edges;
  const LocalFrame* frame;

  explicit NetBuilder(const LocalFrame& f) : frame(&f) {}
  void node(const std::string& id, EastNorth p) { nodes[id] = frame->to_geo(p); }
  void edge(const std::string& a, const std::string& b, EdgeKind k = EdgeKind::kRoad) { edges.push_back({a, b, k}); }
  RoadNetwork build() { return RoadNetwork(nodes, edges); }
};

PlacedSemantic placed(std::string id, SemanticKind kind, LatLon a, LatLon b) {
  PlacedSemantic p;
  p.id = std::move(id);
  p.kind = kind;
  p.a = a;
  p.b = b;
  return p;
}

AgentScript agent(std::string id, AgentMode mode, std::string profile, std::vector<LatLon> route, double speed,
                  std::int64_t start_ms) {
  AgentScript a;
  a.id = std::move(id);
  a.mode = mode;
  a.profile = std::move(profile);
  a.route = std::move(route);
  a.speed_mps = speed;
  a.start_ms = start_ms;
  return a;
}

const std::array<std::string, 3> kProfileNames{"phone-a", "phone-b", "phone-c"};

// One-way straight roads carrying tunnels, bridges, bumps, cat's eyes and
// railway crossings in shuffled order.
Scenario corridors(Rng& rng, std::uint64_t seed) {
  Scenario sc;
  sc.name = "corridors";
  sc.seed = seed;
  sc.profiles = profiles(false);
  const LocalFrame f({31.2000, 29.9000});
  NetBuilder net(f);

  std::vector<SemanticKind> kinds;
  for (auto k : {SemanticKind::kTunnel, SemanticKind::kBridge, SemanticKind::kBump, SemanticKind::kCatsEye,
                 SemanticKind::kRailwayCrossing}) {
    kinds.insert(kinds.end(), kPerKind, k);
  }
  std::shuffle(kinds.begin(), kinds.end(), rng);

  const int rows = 5;
  const std::size_t per_row = kinds.size() / rows;
  int agent_no = 0;
  for (int row = 0; row < rows; ++row) {
    const double y = 250.0 * row;
    double x = 200.0;
    int rail = 0;
    for (std::size_t k = row * per_row; k < (row + 1) * per_row; ++k) {
      const auto kind = kinds[k];
      double len = 0.0;
      switch (kind) {
        case SemanticKind::kTunnel: len = uniform(rng, 40.0, 80.0); break;
        case SemanticKind::kBridge: len = uniform(rng, 70.0, 110.0); break;
        case SemanticKind::kRailwayCrossing: len = uniform(rng, 12.0, 20.0); break;
        default: break;
      }
      const std::string id = "cor" + std::to_string(row) + "-" + std::to_string(k - row * per_row);
      sc.semantics.push_back(placed(id, kind, f.to_geo({x, y}), f.to_geo({x + len, y})));
      if (kind == SemanticKind::kRailwayCrossing) {
        const std::string a = "rail" + std::to_string(row) + "-" + std::to_string(rail) + "s";
        const std::string b = "rail" + std::to_string(row) + "-" + std::to_string(rail++) + "n";
        net.node(a, {x + 0.5 * len, y - 90.0});
        net.node(b, {x + 0.5 * len, y + 90.0});
        net.edge(a, b, EdgeKind::kRailway);
      }
      x += len + uniform(rng, 70.0, 90.0);
    }
    const double end = x + 120.0;
    const std::string w = "row" + std::to_string(row) + "w", e = "row" + std::to_string(row) + "e";
    net.node(w, {0.0, y});
    net.node(e, {end, y});
    net.edge(w, e);

    Turtle t({0.0, y}, kPi / 2.0);
    t.straight(end);
    const auto route = to_geo(f, t.pts);
    for (int i = 0; i < 5; ++i) {
      sc.agents.push_back(agent("v" + std::to_string(agent_no), AgentMode::kVehicle,
                                kProfileNames[static_cast<std::size_t>(agent_no % 3)], route, uniform(rng, 9.0, 12.0),
                                1'600'000'000'000 + 3'600'000LL * agent_no));
      ++agent_no;
    }
  }
  sc.network = net.build();
  return sc;
}

// A chain of legs alternating east and north. Each leg passes one roundabout
// straight through and ends with a 90 degree turn at a four-way junction;
// some legs add an S-curve as a distractor.
Scenario junctions(Rng& rng, std::uint64_t seed) {
  Scenario sc;
  sc.name = "junctions";
  sc.seed = seed;
  sc.profiles = profiles(false);
  const LocalFrame f({31.2500, 29.9000});
  NetBuilder net(f);

  Turtle t({0.0, 0.0}, kPi / 2.0);
  t.straight(60.0);
  std::string prev = "start";
  net.node(prev, {0.0, 0.0});
  std::vector<bool> curve(kPerKind, false);
  for (int i = 0; i < 10; ++i) curve[static_cast<std::size_t>(i)] = true;
  std::shuffle(curve.begin(), curve.end(), rng);

  auto stubs = [&](const std::string& id, EastNorth at, double h1, double h2) {
    for (double h : {h1, h2}) {
      const std::string s = id + "-stub" + std::to_string(static_cast<int>(std::lround(h * 100)));
      net.node(s, add(at, forward(h), 60.0));
      net.edge(id, s);
    }
  };

  for (int leg = 0; leg < kPerKind; ++leg) {
    const std::string rb = "rb" + std::to_string(leg), jn = "jn" + std::to_string(leg);
    t.straight(uniform(rng, 70.0, 90.0));
    // Roundabout: bear right onto the ring, circulate left, bear right off.
    const double alpha = uniform(rng, 50.0, 65.0) * kDegToRad;
    const double ring_r = uniform(rng, 14.0, 18.0);
    const double entry_r = 12.0;
    const double h_leg = t.h;
    t.arc(entry_r, alpha);
    const EastNorth centre = t.arc_centre(ring_r, -2.0 * alpha);
    t.arc(ring_r, -2.0 * alpha);
    t.arc(entry_r, alpha);
    net.node(rb, centre);
    net.edge(prev, rb);
    stubs(rb, centre, h_leg + kPi / 2.0, h_leg - kPi / 2.0);
    auto r = placed("rb" + std::to_string(leg), SemanticKind::kRoundabout, f.to_geo(centre), f.to_geo(centre));
    r.node_id = rb;
    sc.semantics.push_back(r);

    t.straight(uniform(rng, 70.0, 90.0));
    if (curve[static_cast<std::size_t>(leg)]) {
      const double bend = uniform(rng, 10.0, 16.0) * kDegToRad;
      t.arc(100.0, bend);
      t.arc(100.0, -bend);
      t.arc(100.0, -bend);
      t.arc(100.0, bend);
      t.straight(70.0);
    }
    // Junction: the corner of the incoming and outgoing lines.
    const double turn = (leg % 2 == 0) ? -kPi / 2.0 : kPi / 2.0;
    const double corner_r = 8.0;
    t.straight(10.0);
    const EastNorth corner = add(t.p, forward(t.h), corner_r);
    const double h_in = t.h;
    t.arc(corner_r, turn);
    net.node(jn, corner);
    net.edge(rb, jn);
    stubs(jn, corner, h_in, t.h + kPi);
    auto j = placed("jn" + std::to_string(leg), SemanticKind::kIntersectionTurn, f.to_geo(corner), f.to_geo(corner));
    j.node_id = jn;
    sc.semantics.push_back(j);
    prev = jn;
  }
  t.straight(80.0);
  net.node("end", t.p);
  net.edge(prev, "end");
  sc.network = net.build();

  const auto route = to_geo(f, t.pts);
  for (int i = 0; i < 5; ++i) {
    sc.agents.push_back(agent("v" + std::to_string(i), AgentMode::kVehicle, kProfileNames[static_cast<std::size_t>(i % 3)],
                              route, uniform(rng, 10.0, 13.0), 1'600'000'000'000 + 7'200'000LL * i));
  }
  return sc;
}

// Seven by seven grid with all-way stops, three-way stops, signals and
// uncontrolled nodes. Every row and column is driven both ways six times.
Scenario signal_grid(Rng& rng, std::uint64_t seed) {
  Scenario sc;
  sc.name = "grid";
  sc.seed = seed;
  sc.inertial_hz = 10.0;
  sc.profiles = profiles(false);
  const LocalFrame f({31.3000, 29.9000});
  NetBuilder net(f);
  const int n = 7;
  const double block = 150.0, stub = 100.0;
  auto nid = [](int c, int r) { return "g" + std::to_string(c) + "-" + std::to_string(r); };
  auto pos = [&](int c, int r) { return EastNorth{block * c, block * r}; };

  // Neighbour of (c, r) in one of four directions, stubs beyond the border.
  auto neighbour = [&](int c, int r, int dir) -> std::pair<std::string, EastNorth> {
    static const int dc[4] = {1, -1, 0, 0}, dr[4] = {0, 0, 1, -1};
    const int c2 = c + dc[dir], r2 = r + dr[dir];
    if (c2 >= 0 && c2 < n && r2 >= 0 && r2 < n) return {nid(c2, r2), pos(c2, r2)};
    const std::string s = nid(c, r) + "-x" + std::to_string(dir);
    return {s, add(pos(c, r), {dc[dir] * stub, dr[dir] * stub})};
  };

  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) net.node(nid(c, r), pos(c, r));
  }
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      for (int dir = 0; dir < 4; ++dir) {
        auto [other, p] = neighbour(c, r, dir);
        if (other.find("-x") != std::string::npos) {
          net.node(other, p);
          net.edge(nid(c, r), other);
        } else if (dir == 0 || dir == 2) {
          net.edge(nid(c, r), other);
        }
      }
    }
  }
  sc.network = net.build();

  enum Control { kNoControl, kAllStop, kThreeStop, kSignal };
  std::vector<Control> control;
  control.insert(control.end(), 4, kAllStop);
  control.insert(control.end(), 6, kThreeStop);
  control.insert(control.end(), 32, kSignal);
  control.resize(static_cast<std::size_t>(n * n), kNoControl);
  std::shuffle(control.begin(), control.end(), rng);

  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < n; ++r) {
      const Control ctl = control[static_cast<std::size_t>(c * n + r)];
      const std::string id = nid(c, r);
      if (ctl == kSignal) {
        auto p = placed("tl-" + id, SemanticKind::kTrafficLight, f.to_geo(pos(c, r)), f.to_geo(pos(c, r)));
        p.node_id = id;
        sc.semantics.push_back(p);
      } else if (ctl == kAllStop || ctl == kThreeStop) {
        const int free_dir = ctl == kThreeStop ? uniform_int(rng, 0, 3) : -1;
        for (int dir = 0; dir < 4; ++dir) {
          if (dir == free_dir) continue;
          auto [from, fp] = neighbour(c, r, dir);
          const EastNorth node = pos(c, r);
          const double d = std::hypot(fp.east_m - node.east_m, fp.north_m - node.north_m);
          const EastNorth stop = add(node, {(fp.east_m - node.east_m) / d, (fp.north_m - node.north_m) / d}, 8.0);
          auto p = placed("ss-" + id + "-" + from, SemanticKind::kStopSign, f.to_geo(stop), f.to_geo(stop));
          p.node_id = id;
          p.approach_from = from;
          sc.semantics.push_back(p);
        }
      }
    }
  }

  int agent_no = 0;
  for (int line = 0; line < 2 * n; ++line) {
    const bool row = line < n;
    const int k = line % n;
    const EastNorth a = row ? EastNorth{-stub, block * k} : EastNorth{block * k, -stub};
    const EastNorth b = row ? EastNorth{block * (n - 1) + stub, block * k} : EastNorth{block * k, block * (n - 1) + stub};
    for (int dir = 0; dir < 2; ++dir) {
      const EastNorth from = dir == 0 ? a : b, to = dir == 0 ? b : a;
      Turtle t(from, std::atan2(to.east_m - from.east_m, to.north_m - from.north_m));
      t.straight(std::hypot(to.east_m - from.east_m, to.north_m - from.north_m));
      const auto route = to_geo(f, t.pts);
      for (int i = 0; i < 6; ++i) {
        sc.agents.push_back(agent("v" + std::to_string(agent_no), AgentMode::kVehicle,
                                  kProfileNames[static_cast<std::size_t>(agent_no % 3)], route, uniform(rng, 11.0, 14.0),
                                  1'600'000'000'000 + 600'000LL * agent_no));
        ++agent_no;
      }
    }
  }
  return sc;
}

// Walkers heading north in three columns across thirty east-west roads.
// Each road is crossed by a crosswalk, an underpass or a footbridge; the
// blocks between roads hold stairs and escalators.
Scenario pedestrians(Rng& rng, std::uint64_t seed) {
  Scenario sc;
  sc.name = "pedestrians";
  sc.seed = seed;
  sc.profiles = profiles(true);
  const LocalFrame f({31.3500, 29.9000});
  NetBuilder net(f);
  const int columns = 3, roads = kPerKind;
  const double spacing = 90.0;
  const double col_gap = 200.0;

  std::vector<SemanticKind> crossing;
  for (auto k : {SemanticKind::kCrosswalk, SemanticKind::kUnderpass, SemanticKind::kFootbridge}) {
    crossing.insert(crossing.end(), kPerKind, k);
  }
  std::shuffle(crossing.begin(), crossing.end(), rng);
  std::vector<int> midblock;  // 0 none, 1 stairs, 2 escalator
  midblock.insert(midblock.end(), kPerKind, 1);
  midblock.insert(midblock.end(), kPerKind, 2);
  midblock.resize(static_cast<std::size_t>(columns * (roads - 1)), 0);
  std::shuffle(midblock.begin(), midblock.end(), rng);

  std::vector<double> width(roads);
  std::vector<int> lanes(roads);
  for (int k = 0; k < roads; ++k) {
    lanes[static_cast<std::size_t>(k)] = uniform_int(rng, 2, 4);
    width[static_cast<std::size_t>(k)] = 3.5 * lanes[static_cast<std::size_t>(k)];
    const double y = spacing * (k + 1);
    const std::string w = "road" + std::to_string(k) + "w", e = "road" + std::to_string(k) + "e";
    net.node(w, {-150.0, y});
    net.node(e, {col_gap * (columns - 1) + 150.0, y});
    net.edge(w, e);
  }
  sc.network = net.build();

  int agent_no = 0;
  for (int c = 0; c < columns; ++c) {
    const double x = col_gap * c;
    std::vector<EastNorth> pts{{x, 0.0}};
    auto go = [&](EastNorth p) {
      const EastNorth q = pts.back();
      const double d = std::hypot(p.east_m - q.east_m, p.north_m - q.north_m);
      const int steps = std::max(1, static_cast<int>(std::ceil(d / 1.0)));
      for (int i = 1; i <= steps; ++i) pts.push_back(add(q, {p.east_m - q.east_m, p.north_m - q.north_m}, 1.0 * i / steps));
    };
    for (int k = 0; k < roads; ++k) {
      const double y = spacing * (k + 1);
      const double half = 0.5 * width[static_cast<std::size_t>(k)];
      const auto kind = crossing[static_cast<std::size_t>(c * roads + k)];
      const std::string id = "p" + std::to_string(c) + "-r" + std::to_string(k);
      if (kind == SemanticKind::kCrosswalk) {
        // Reach the curb, walk along it, cross, and walk back to the column.
        go({x, y - half});
        go({x + 10.0, y - half});
        go({x + 10.0, y + half});
        go({x, y + half});
        auto p = placed(id, kind, f.to_geo({x + 10.0, y - half}), f.to_geo({x + 10.0, y + half}));
        p.lanes = lanes[static_cast<std::size_t>(k)];
        sc.semantics.push_back(p);
      } else {
        const bool under = kind == SemanticKind::kUnderpass;
        const int steps = under ? uniform_int(rng, 16, 24) : uniform_int(rng, 24, 34);
        const double clear = under ? 2.0 : 1.5;
        const double y0 = y - half - clear - steps * 0.3, y1 = y + half + clear + steps * 0.3;
        go({x, y0});
        go({x, y1});
        auto p = placed(id, kind, f.to_geo({x, y0}), f.to_geo({x, y1}));
        p.steps = steps;
        sc.semantics.push_back(p);
      }
      if (k + 1 < roads) {
        const int mb = midblock[static_cast<std::size_t>(c * (roads - 1) + k)];
        const double ym = y + 0.5 * spacing;
        if (mb != 0) {
          const bool stairs = mb == 1;
          const double len = stairs ? 0.3 * uniform_int(rng, 15, 30) : uniform(rng, 15.0, 25.0);
          go({x, ym - 0.5 * len});
          go({x, ym + 0.5 * len});
          auto p = placed("p" + std::to_string(c) + "-m" + std::to_string(k),
                          stairs ? SemanticKind::kStairs : SemanticKind::kEscalator, f.to_geo({x, ym - 0.5 * len}),
                          f.to_geo({x, ym + 0.5 * len}));
          p.ascending = uniform(rng, 0.0, 1.0) < 0.5;
          if (stairs) p.steps = static_cast<int>(std::lround(len / 0.3));
          sc.semantics.push_back(p);
        }
      }
    }
    go({x, spacing * (roads + 1)});
    const auto route = to_geo(f, pts);
    for (int i = 0; i < 5; ++i) {
      sc.agents.push_back(agent("w" + std::to_string(agent_no), AgentMode::kPedestrian,
                                kProfileNames[static_cast<std::size_t>(agent_no % 3)], route, uniform(rng, 1.2, 1.5),
                                1'600'000'000'000 + 3'600'000LL * agent_no));
      ++agent_no;
    }
    if (c == 0) {
      // Someone walking indoors along the same line; the pipeline must skip it.
      auto a = agent("w-indoor", AgentMode::kPedestrian, "phone-a", route, 1.3, 1'700'000'000'000);
      a.declared_indoor = true;
      a.duration_s = 120.0;
      sc.agents.push_back(a);
    }
  }
  return sc;
}

}  // namespace

std::vector<Scenario> build_benchmark(std::uint64_t seed) {
  std::vector<Scenario> suite;
  std::uint64_t k = 0;
  auto next = [&] { return splitmix64(seed ^ splitmix64(++k)); };
  {
    Rng rng(next());
    suite.push_back(corridors(rng, next()));
  }
  {
    Rng rng(next());
    suite.push_back(junctions(rng, next()));
  }
  {
    Rng rng(next());
    suite.push_back(signal_grid(rng, next()));
  }
  {
    Rng rng(next());
    suite.push_back(pedestrians(rng, next()));
  }
  return suite;
}

nlohmann::ordered_json benchmark_manifest(const std::vector<Scenario>& suite) {
  std::map<std::string, int> counts;
  for (auto k : kAllKinds) counts[std::string(kind_name(k))] = 0;
  double km = 0.0;
  std::size_t agents = 0;
  std::set<std::string> profile_names;
  nlohmann::ordered_json scenarios = nlohmann::ordered_json::array();
  for (const auto& sc : suite) {
    for (const auto& s : sc.semantics) ++counts[std::string(kind_name(s.kind))];
    for (const auto& a : sc.agents) {
      for (std::size_t i = 1; i < a.route.size(); ++i) km += haversine_m(a.route[i - 1], a.route[i]) / 1000.0;
    }
    for (const auto& p : sc.profiles) profile_names.insert(p.name);
    agents += sc.agents.size();
    scenarios.push_back({{"name", sc.name}, {"agents", sc.agents.size()}, {"semantics", sc.semantics.size()}});
  }
  nlohmann::ordered_json j;
  j["scenarios"] = scenarios;
  j["instances_per_kind"] = counts;
  j["agents"] = agents;
  j["device_profiles"] = profile_names.size();
  j["route_km"] = std::round(km * 10.0) / 10.0;
  return j;
}

}  // namespace mapsem::sim
