#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "mapsem/aggregation.hpp"
#include "mapsem/error.hpp"
#include "mapsem/simulator.hpp"
#include "mapsem/trace_io.hpp"

using namespace mapsem;
using namespace mapsem::sim;

namespace {

const LocalFrame kFrame({30.10, 31.40});

LatLon at(double east, double north = 0.0) { return kFrame.to_geo({east, north}); }

std::vector<LatLon> east_line(double from, double to, double step = 2.0) {
  std::vector<LatLon> pts;
  for (double e = from; e <= to + 1e-9; e += step) pts.push_back(at(e));
  return pts;
}

DeviceProfile phone() {
  DeviceProfile p;
  p.name = "phone";
  return p;
}

// A 1 km east-west road with one vehicle driving it at 10 m/s.
Scenario straight_road() {
  Scenario sc;
  sc.name = "road";
  sc.seed = 11;
  sc.network = RoadNetwork({{"w", at(0)}, {"e", at(1000)}}, {{"w", "e", EdgeKind::kRoad}});
  sc.profiles = {phone()};
  AgentScript a;
  a.id = "car";
  a.profile = "phone";
  a.route = east_line(0, 1000);
  a.speed_mps = 10.0;
  a.start_ms = 1'700'000'000'000;
  sc.agents = {a};
  return sc;
}

PlacedSemantic semantic(std::string id, SemanticKind kind, double e0, double e1) {
  PlacedSemantic s;
  s.id = std::move(id);
  s.kind = kind;
  s.a = at(e0);
  s.b = at(e1);
  return s;
}

// Trace of the covariance of the gravity vector over [t0, t1]: the sum of
// per-axis variances, independent of how the phone is mounted.
double gravity_variance(const Trace& t, std::int64_t t0, std::int64_t t1) {
  double s[3] = {0, 0, 0}, ss[3] = {0, 0, 0};
  int n = 0;
  for (const auto& x : t.samples) {
    if (x.timestamp_ms < t0 || x.timestamp_ms > t1 || !x.gravity) continue;
    const double v[3] = {x.gravity->x, x.gravity->y, x.gravity->z};
    for (int k = 0; k < 3; ++k) {
      s[k] += v[k];
      ss[k] += v[k] * v[k];
    }
    ++n;
  }
  REQUIRE(n > 2);
  double r = 0.0;
  for (int k = 0; k < 3; ++k) r += ss[k] / n - (s[k] / n) * (s[k] / n);
  return r;
}

double accel_variance(const Trace& t, std::int64_t t0, std::int64_t t1) {
  double s = 0.0, ss = 0.0;
  int n = 0;
  for (const auto& x : t.samples) {
    if (x.timestamp_ms < t0 || x.timestamp_ms > t1 || !x.accel) continue;
    const double m = std::sqrt(x.accel->x * x.accel->x + x.accel->y * x.accel->y + x.accel->z * x.accel->z);
    s += m;
    ss += m * m;
    ++n;
  }
  REQUIRE(n > 2);
  return ss / n - (s / n) * (s / n);
}

std::int64_t time_at_east(const Trace& t, double east) {
  for (const auto& x : t.samples) {
    if (kFrame.to_local(x.location()).east_m >= east) return x.timestamp_ms;
  }
  return t.samples.back().timestamp_ms;
}

std::string bytes(const Simulation& s) {
  std::ostringstream out;
  io::write_traces(out, s.traces);
  out << truth_to_json(s.truth).dump();
  return out.str();
}

}  // namespace

TEST_CASE("same seed gives identical bytes; parallel run matches per-agent run") {
  auto sc = straight_road();
  sc.semantics = {semantic("b1", SemanticKind::kBump, 500, 500)};
  auto second = sc.agents[0];
  second.id = "car2";
  second.start_ms += 600'000;
  sc.agents.push_back(second);
  const auto a = simulate(sc);
  const auto b = simulate(sc);
  CHECK(bytes(a) == bytes(b));
  for (std::size_t i = 0; i < sc.agents.size(); ++i) CHECK(simulate_agent(sc, i).first == a.traces[i]);

  sc.seed = 12;
  CHECK(bytes(simulate(sc)) != bytes(a));
}

TEST_CASE("stationary agent with no semantics: constant channels and empty truth") {
  Scenario sc;
  sc.name = "empty";
  sc.seed = 3;
  sc.profiles = {phone()};
  AgentScript a;
  a.id = "still";
  a.mode = AgentMode::kPedestrian;
  a.profile = "phone";
  a.route = {at(0)};
  a.duration_s = 20.0;
  sc.agents = {a};
  const auto s = simulate(sc);
  REQUIRE(s.traces.size() == 1);
  CHECK(s.truth.instances.empty());
  CHECK(s.truth.spans.empty());
  const auto& t = s.traces[0];
  CHECK(t.samples.size() > 900);
  double norm = 0.0;
  for (const auto& x : t.samples) {
    norm += std::sqrt(x.accel->x * x.accel->x + x.accel->y * x.accel->y + x.accel->z * x.accel->z);
    CHECK(haversine_m(x.location(), at(0)) < 6.0 * 4.0);
  }
  CHECK(norm / static_cast<double>(t.samples.size()) == doctest::Approx(9.80665).epsilon(0.01));
  CHECK(accel_variance(t, t.samples.front().timestamp_ms, t.samples.back().timestamp_ms) < 0.05);
}

TEST_CASE("bump at 10 m/s: gravity variance in the bump window is at least 5x the smooth road") {
  auto sc = straight_road();
  sc.semantics = {semantic("b1", SemanticKind::kBump, 500, 500)};
  const auto s = simulate(sc);
  REQUIRE(s.truth.spans.size() == 1);
  const auto& span = s.truth.spans[0];
  CHECK(span.semantic_id == "b1");
  const auto& t = s.traces[0];
  const double bump = gravity_variance(t, span.t_start_ms, span.t_end_ms + 250);
  const double road = gravity_variance(t, time_at_east(t, 200), time_at_east(t, 300));
  CHECK(bump >= 5.0 * road);
}

TEST_CASE("benchmark signal orderings: cats eye < railway < bump on gravity, escalator < walking on accel") {
  const auto suite = build_benchmark(42);
  std::map<SemanticKind, std::vector<double>> grav;
  std::vector<double> escalator, walking;
  for (const auto& sc : suite) {
    if (sc.name != "corridors" && sc.name != "pedestrians") continue;
    const auto s = simulate(sc);
    std::map<std::string, const Trace*> by_id;
    for (const auto& t : s.traces) by_id[t.trace_id] = &t;
    for (const auto& sp : s.truth.spans) {
      const Trace& t = *by_id.at(sp.trace_id);
      switch (sp.kind) {
        case SemanticKind::kBump:
        case SemanticKind::kCatsEye:
          grav[sp.kind].push_back(gravity_variance(t, sp.t_start_ms, sp.t_end_ms + 250));
          break;
        case SemanticKind::kRailwayCrossing:
          grav[sp.kind].push_back(gravity_variance(t, sp.t_start_ms, sp.t_end_ms));
          break;
        case SemanticKind::kEscalator:
          escalator.push_back(accel_variance(t, sp.t_start_ms + 2000, sp.t_end_ms - 2000));
          walking.push_back(accel_variance(t, sp.t_start_ms - 8000, sp.t_start_ms - 4000));
          break;
        default: break;
      }
    }
  }
  const auto& cats = grav[SemanticKind::kCatsEye];
  const auto& rail = grav[SemanticKind::kRailwayCrossing];
  const auto& bump = grav[SemanticKind::kBump];
  REQUIRE(!cats.empty());
  REQUIRE(!rail.empty());
  REQUIRE(!bump.empty());
  CHECK(*std::max_element(cats.begin(), cats.end()) < *std::min_element(rail.begin(), rail.end()));
  CHECK(*std::max_element(rail.begin(), rail.end()) < *std::min_element(bump.begin(), bump.end()));
  REQUIRE(escalator.size() == walking.size());
  REQUIRE(!escalator.empty());
  for (std::size_t i = 0; i < escalator.size(); ++i) CHECK(escalator[i] < walking[i]);
}

TEST_CASE("benchmark manifest: every kind placed at least 30 times over 3 profiles") {
  const auto suite = build_benchmark(42);
  const auto m = benchmark_manifest(suite);
  for (auto k : kAllKinds) CHECK(m["instances_per_kind"][std::string(kind_name(k))].get<int>() >= 30);
  CHECK(m["device_profiles"].get<int>() >= 3);
  for (const auto& sc : suite) CHECK_NOTHROW(validate_scenario(sc));
}

TEST_CASE("benchmark spacing: same-kind instances at least 4 eps apart") {
  const Config config;
  for (const auto& sc : build_benchmark(42)) {
    for (std::size_t i = 0; i < sc.semantics.size(); ++i) {
      const auto& a = sc.semantics[i];
      if (a.kind == SemanticKind::kStopSign || a.kind == SemanticKind::kTrafficLight) continue;
      for (std::size_t j = i + 1; j < sc.semantics.size(); ++j) {
        const auto& b = sc.semantics[j];
        if (b.kind != a.kind) continue;
        const double d = std::min({haversine_m(a.a, b.a), haversine_m(a.b, b.b), haversine_m(a.a, b.b),
                                   haversine_m(a.b, b.a)});
        CHECK_MESSAGE(d >= 4.0 * eps_for(a.kind, config), sc.name << ": " << a.id << " vs " << b.id);
      }
    }
  }
}

TEST_CASE("two seeds: different placements, same counts") {
  const auto a = build_benchmark(42);
  const auto b = build_benchmark(43);
  CHECK(benchmark_manifest(a)["instances_per_kind"] == benchmark_manifest(b)["instances_per_kind"]);
  bool moved = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].semantics.size() && j < b[i].semantics.size(); ++j) {
      moved = moved || haversine_m(a[i].semantics[j].a, b[i].semantics[j].a) > 1.0;
    }
  }
  CHECK(moved);
}

TEST_CASE("invalid scenarios are rejected") {
  auto expect_invalid = [](const Scenario& sc) {
    try {
      validate_scenario(sc);
      FAIL("accepted an invalid scenario");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidScenario);
    }
  };
  {
    auto sc = straight_road();
    sc.agents.push_back(sc.agents[0]);
    expect_invalid(sc);
  }
  {
    auto sc = straight_road();
    sc.agents[0].profile = "unknown";
    expect_invalid(sc);
  }
  {
    auto sc = straight_road();
    sc.agents[0].speed_mps = 0.0;
    expect_invalid(sc);
  }
  {
    auto sc = straight_road();
    sc.agents[0].route.clear();
    expect_invalid(sc);
  }
  {
    auto sc = straight_road();
    auto off = semantic("far", SemanticKind::kBump, 500, 500);
    off.a = off.b = at(500, 60);
    sc.semantics = {off};
    expect_invalid(sc);
  }
  {
    auto sc = straight_road();
    sc.semantics = {semantic("tl", SemanticKind::kTrafficLight, 1000, 1000)};
    sc.semantics[0].node_id = "nowhere";
    expect_invalid(sc);
  }
  {
    auto sc = straight_road();
    sc.agents[0].route = {at(0)};
    expect_invalid(sc);  // a one-point route needs a duration
  }
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(R"({"name": 3})")), Error);
}

TEST_CASE("scenario and truth JSON round trip") {
  auto sc = straight_road();
  sc.semantics = {semantic("b1", SemanticKind::kBump, 500, 500), semantic("t1", SemanticKind::kTunnel, 700, 780)};
  const auto j = scenario_to_json(sc);
  CHECK(scenario_to_json(scenario_from_json(nlohmann::json::parse(j.dump()))) == j);
  const auto s = simulate(sc);
  const auto tj = truth_to_json(s.truth);
  CHECK(truth_to_json(truth_from_json(nlohmann::json::parse(tj.dump()))) == tj);
  CHECK(s.truth.instances.size() == 2);
}
