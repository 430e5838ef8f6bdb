#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>

#include "mapsem/error.hpp"
#include "mapsem/regulators.hpp"

using namespace mapsem;

namespace {

ApproachStats approach(std::string id, int n, int slow) { return {"n", std::move(id), n, slow}; }

}  // namespace

TEST_CASE("ratio thresholds are inclusive") {
  Config c;
  CHECK_FALSE(potential_stop(approach("a", 100, 79), c));
  CHECK(potential_stop(approach("a", 100, 80), c));
  CHECK_FALSE(potential_light(approach("a", 100, 14), c));
  CHECK(potential_light(approach("a", 100, 15), c));
  CHECK(potential_stop(approach("a", 10, 9), c));
  CHECK(potential_light(approach("a", 10, 2), c));
  CHECK_FALSE(potential_stop(approach("a", 10, 2), c));
  // 0.8 and 0.15 are not exact in binary; 4/5 and 3/20 still qualify.
  CHECK(potential_stop(approach("a", 5, 4), c));
  CHECK(potential_light(approach("a", 20, 3), c));
  CHECK_THROWS_AS(potential_stop(approach("a", 0, 0), c), Error);
  CHECK_THROWS_AS(potential_stop(approach("a", 5, 6), c), Error);
}

TEST_CASE("four-way example: three potential stops become stop signs") {
  Config c;
  const std::vector<ApproachStats> s{approach("a", 10, 10), approach("b", 10, 9), approach("c", 10, 10),
                                     approach("d", 10, 2)};
  const auto r = infer_regulators(s, c);
  CHECK(r.regulation == Regulation::kStopSigns);
  CHECK(r.stop_approaches == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("too few traces on any approach") {
  Config c;
  const std::vector<ApproachStats> s{approach("a", 10, 10), approach("b", 4, 4), approach("c", 10, 10)};
  try {
    infer_regulators(s, c);
    FAIL("expected InsufficientTraces");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientTraces);
  }
}

TEST_CASE("aggregation rules match a brute-force oracle for k = 3, 4, 5") {
  Config c;
  // Approach label 0: no slowdown, 1: light only (3/10), 2: stop (9/10).
  for (int k = 3; k <= 5; ++k) {
    int combos = 1;
    for (int i = 0; i < k; ++i) combos *= 3;
    for (int code = 0; code < combos; ++code) {
      std::vector<ApproachStats> s;
      std::vector<int> label;
      for (int i = 0, rest = code; i < k; ++i, rest /= 3) {
        label.push_back(rest % 3);
        const int slow = label.back() == 0 ? 0 : label.back() == 1 ? 3 : 9;
        s.push_back(approach(std::string(1, static_cast<char>('a' + i)), 10, slow));
      }
      int stops = 0, lights = 0;
      for (int l : label) {
        stops += l == 2;
        lights += l >= 1;
      }
      Regulation expected = Regulation::kNone;
      if (stops == k || stops == k - 1) {
        expected = Regulation::kStopSigns;
      } else if (2 * lights > k) {
        expected = Regulation::kTrafficLight;
      }
      CAPTURE(k);
      CAPTURE(code);
      const auto r = infer_regulators(s, c);
      CHECK(r.regulation == expected);
      CHECK((r.regulation == Regulation::kStopSigns) == !r.stop_approaches.empty());
      if (expected == Regulation::kStopSigns) CHECK(r.stop_approaches.size() == static_cast<std::size_t>(stops));
    }
  }
}

namespace {

RoadNetwork plus_junction(const LocalFrame& f) {
  return RoadNetwork({{"c", f.to_geo({0, 0})},
                      {"w", f.to_geo({-200, 0})},
                      {"e", f.to_geo({200, 0})},
                      {"s", f.to_geo({0, -200})},
                      {"n", f.to_geo({0, 200})}},
                     {{"w", "c"}, {"c", "e"}, {"s", "c"}, {"c", "n"}});
}

// Eastbound 1 Hz track through the junction; `stop` inserts a 3 s halt
// 8 m before it.
std::vector<TrackPoint> eastbound(const LocalFrame& f, bool stop) {
  std::vector<std::pair<double, double>> xs;  // position, speed
  for (double x = -150; x < -5; x += 10) xs.push_back({x, 10.0});
  if (stop) {
    for (int i = 0; i < 3; ++i) xs.push_back({-8.0, 0.0});
  }
  for (double x = 0; x < 150; x += 10) xs.push_back({x, 10.0});
  std::vector<TrackPoint> t;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    TrackPoint p;
    p.timestamp_ms = 1000 * static_cast<std::int64_t>(i);
    p.location = f.to_geo({xs[i].first, 1.5});
    p.heading_rad = std::numbers::pi / 2;
    p.speed_mps = xs[i].second;
    t.push_back(p);
  }
  return t;
}

}  // namespace

TEST_CASE("observations identify the incoming edge and the slowdown") {
  Config c;
  const LocalFrame f({40.0, -3.0});
  const auto net = plus_junction(f);
  const NetworkIndex index(net);
  const auto go = approach_observations("t1", eastbound(f, false), index, c);
  REQUIRE(go.size() == 1);
  CHECK(go[0].node_id == "c");
  CHECK(go[0].approach_id == "w>c");
  CHECK(go[0].min_speed_mps == 10.0);
  CHECK(haversine_m(go[0].stop_location, f.to_geo({-8, 0})) < 1e-6);

  const auto halt = approach_observations("t2", eastbound(f, true), index, c);
  REQUIRE(halt.size() == 1);
  CHECK(halt[0].min_speed_mps == 0.0);
}

TEST_CASE("accumulator counts each trace once and emits stop signs") {
  Config c;
  const LocalFrame f({40.0, -3.0});
  ApproachAccumulator acc;
  const LatLon node = f.to_geo({0, 0});
  for (const std::string approach_id : {"w>c", "e>c", "s>c", "n>c"}) {
    for (int t = 0; t < 6; ++t) {
      const bool slow = approach_id != "n>c" || t == 0;
      ApproachObservation o{"t" + std::to_string(t) + approach_id, "c", approach_id, slow ? 1.0 : 9.0, node, node};
      acc.add(o);
      acc.add(o);  // duplicate pass of the same trace
    }
  }
  const auto stats = acc.stats(c);
  REQUIRE(stats.size() == 4);
  for (const auto& s : stats) CHECK(s.n_traces == 6);
  const auto features = acc.regulator_features(c);
  CHECK(features.size() == 3);
  for (const auto& d : features) CHECK(d.kind == SemanticKind::kStopSign);

  ApproachAccumulator sparse;
  sparse.add({"t", "c", "w>c", 0.0, node, node});
  CHECK(sparse.regulator_features(c).empty());
}
