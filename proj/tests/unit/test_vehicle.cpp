#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "mapsem/vehicle.hpp"

using namespace mapsem;

namespace {

constexpr double kPi = std::numbers::pi;
const LatLon kOrigin{48.0, 11.0};

// Straight eastbound drive at 10 m/s, 50 Hz, with quiet-road sensor noise.
// `inject` adds event signatures given the along-track position.
std::vector<MotionFrameSample> drive(double length_m, const std::function<void(double, MotionFrameSample&)>& inject) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01(0.0, 1.0);
  const LocalFrame frame(kOrigin);
  std::vector<MotionFrameSample> out;
  const double v = 10.0;
  for (std::int64_t k = 0;; ++k) {
    const double t = 0.02 * static_cast<double>(k);
    const double x = v * t;
    if (x > length_m) break;
    MotionFrameSample s;
    s.timestamp_ms = 20 * k;
    s.location = frame.to_geo({x, 0.0});
    s.loc_accuracy_m = 3.0;
    s.heading_rad = kPi / 2;
    s.gravity_y = 0.03 * n01(rng);
    s.gravity_z = 9.81 + 0.03 * n01(rng);
    s.accel_world = Vec3{0.1 * n01(rng), 0.1 * n01(rng), 0.2 * n01(rng)};
    s.magnet_world = Vec3{0.5 * n01(rng), 20.0 + 0.5 * n01(rng), -40.0 + 0.5 * n01(rng)};
    if (k % 50 == 0) s.serving_rss_dbm = -70.0 + n01(rng);
    inject(x, s);
    out.push_back(s);
  }
  return out;
}

// Damped 12 Hz ring starting at x0, lasting about 0.25 s at 10 m/s.
double ring(double x, double x0, double amplitude) {
  if (x < x0) return 0.0;
  const double dt = (x - x0) / 10.0;
  return amplitude * std::exp(-dt / 0.06) * std::sin(2 * kPi * 12.0 * dt);
}

double along(const LatLon& p) { return LocalFrame(kOrigin).to_local(p).east_m; }

}  // namespace

TEST_CASE("event tree recovers each injected road feature") {
  Config c;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01(0.0, 1.0);
  auto samples = drive(3200.0, [&](double x, MotionFrameSample& s) {
    if (x >= 1000 && x < 1200) {  // tunnel: RSS loss and X-only magnetic disturbance
      s.magnet_world->x += 2.0 * n01(rng);
      if (s.serving_rss_dbm) *s.serving_rss_dbm -= 20.0;
    }
    for (double x0 : {600.0, 602.7}) {  // bump: both axles
      *s.gravity_y += ring(x, x0, 2.0);
      *s.gravity_z += ring(x, x0, 2.0);
    }
    if (x >= 1600 && x < 1720) *s.gravity_y += 0.4 * std::sin(2 * kPi * (x - 1600) / 120.0);
    if (x >= 2200 && x < 2215) {  // railway crossing: 15 m of rough surface
      *s.gravity_y += 0.3 * n01(rng);
      *s.gravity_z += 0.3 * n01(rng);
    }
    for (double x0 : {2600.0, 2602.7}) s.accel_world->x += ring(x, x0, 2.0);  // cat's eye
  });

  const auto found = vehicle_event_semantics("t", samples, c, nullptr);
  REQUIRE(found.size() == 5);
  struct Expect {
    SemanticKind kind;
    double x;
  };
  const Expect expected[] = {{SemanticKind::kBump, 602},
                             {SemanticKind::kTunnel, 1100},
                             {SemanticKind::kBridge, 1720},
                             {SemanticKind::kRailwayCrossing, 2207},
                             {SemanticKind::kCatsEye, 2602}};
  for (std::size_t i = 0; i < 5; ++i) {
    CAPTURE(i);
    CHECK(found[i].kind == expected[i].kind);
    CHECK(std::abs(along(found[i].location) - expected[i].x) < 10.0);
    CHECK(found[i].weight == doctest::Approx(0.25));
  }
  REQUIRE(found[2].start_location);
  CHECK(std::abs(along(*found[2].start_location) - 1600.0) < 10.0);
  CHECK(*found[2].span_length_m == doctest::Approx(120.0).epsilon(0.15));
  CHECK(*found[1].span_length_m == doctest::Approx(200.0).epsilon(0.1));
}

TEST_CASE("quiet road yields nothing") {
  Config c;
  const auto samples = drive(1500.0, [](double, MotionFrameSample&) {});
  CHECK(vehicle_event_semantics("t", samples, c, nullptr).empty());
}

TEST_CASE("event tree abstains without the magnetometer") {
  Config c;
  auto samples = drive(1200.0, [](double x, MotionFrameSample& s) {
    for (double x0 : {600.0, 602.7}) {
      *s.gravity_y += ring(x, x0, 2.0);
      *s.gravity_z += ring(x, x0, 2.0);
    }
  });
  REQUIRE(vehicle_event_semantics("t", samples, c, nullptr).size() == 1);
  for (auto& s : samples) s.magnet_world.reset();
  CHECK(vehicle_event_semantics("t", samples, c, nullptr).empty());
}

TEST_CASE("railway confidence doubles next to a mapped railway") {
  Config c;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto samples = drive(1200.0, [&](double x, MotionFrameSample& s) {
    if (x >= 600 && x < 615) {
      *s.gravity_y += 0.3 * n01(rng);
      *s.gravity_z += 0.3 * n01(rng);
    }
  });
  const LocalFrame f(kOrigin);
  const RoadNetwork net({{"r1", f.to_geo({607, -200})}, {"r2", f.to_geo({607, 200})}},
                        {{"r1", "r2", EdgeKind::kRailway}});
  const NetworkIndex index(net);
  const auto plain = vehicle_event_semantics("t", samples, c, nullptr);
  const auto boosted = vehicle_event_semantics("t", samples, c, &index);
  REQUIRE(plain.size() == 1);
  REQUIRE(boosted.size() == 1);
  CHECK(plain[0].kind == SemanticKind::kRailwayCrossing);
  CHECK(plain[0].confidence == 1.0);
  CHECK(boosted[0].confidence == 2.0);
}

TEST_CASE("anomalous window rule") {
  Config c;
  VehBaseline b{0.01, 0.01, 0.01, 0.25, 0.25, 0.0};
  WindowFeatures w;
  w.var_gravity_y = 0.01;
  w.var_gravity_z = 0.01;
  w.var_accel = Vec3{0.01, 0.01, 0.01};
  w.var_magnet_x = 0.25;
  w.var_magnet_y = 0.25;
  w.mean_gravity_y = 0.0;
  CHECK_FALSE(window_anomalous(w, b, c));
  auto v = w;
  v.var_gravity_y = 0.03;
  CHECK(window_anomalous(v, b, c));
  v = w;
  v.var_gravity_y = 0.0299;
  CHECK_FALSE(window_anomalous(v, b, c));
  v = w;
  v.rss_delta_db = -10.5;
  CHECK(window_anomalous(v, b, c));
  v.rss_delta_db = -9.5;
  CHECK_FALSE(window_anomalous(v, b, c));
  v = w;
  v.mean_gravity_y = 0.41;
  CHECK(window_anomalous(v, b, c));
  v.mean_gravity_y = -0.39;
  CHECK_FALSE(window_anomalous(v, b, c));
}

namespace {

struct Piece {
  double duration_s;
  double turn_deg;
};

std::pair<std::vector<double>, std::vector<double>> heading_profile(const std::vector<Piece>& pieces) {
  std::vector<double> t, h;
  double heading = 0.0, now = 0.0;
  for (const auto& p : pieces) {
    const int n = static_cast<int>(std::lround(p.duration_s * 10));
    for (int i = 0; i < n; ++i) {
      t.push_back(now);
      h.push_back(wrap_angle(heading));
      now += 0.1;
      heading += p.turn_deg * kDegToRad / n;
    }
  }
  return {t, h};
}

HeadingClass classify(const std::vector<Piece>& pieces, bool junction) {
  Config c;
  const auto [t, h] = heading_profile(pieces);
  return classify_heading_feature(heading_shape(t, h, c), junction, c);
}

}  // namespace

TEST_CASE("heading tree examples") {
  CHECK(classify({{3, 0}, {4, 90}, {3, 0}}, false) == HeadingClass::kTurn);
  CHECK(classify({{3, 0}, {4, -90}, {3, 0}}, true) == HeadingClass::kIntersectionTurn);
  CHECK(classify({{3, 0}, {3, 20}, {3, -20}, {3, 0}}, true) == HeadingClass::kCurve);
  CHECK(classify({{3, 0}, {2, 40}, {6, -200}, {2, 40}, {3, 0}}, true) == HeadingClass::kRoundabout);
  CHECK(classify({{3, 0}, {4, 45}, {3, 0}}, false) == HeadingClass::kNone);
  CHECK(classify({{3, 0}, {6, 180}, {3, 0}}, false) == HeadingClass::kNone);
}

TEST_CASE("heading tree classes are exclusive and ordered by net rotation") {
  // Single-sign turns sweep through curve, none, turn, none as |net| grows.
  for (int deg = -170; deg <= 170; deg += 5) {
    CAPTURE(deg);
    const auto cls = classify({{3, 0}, {6, static_cast<double>(deg)}, {3, 0}}, false);
    const int a = std::abs(deg);
    if (a < 30) {
      CHECK(cls == HeadingClass::kCurve);
    } else if (a >= 60 && a <= 120) {
      CHECK(cls == HeadingClass::kTurn);
    } else {
      CHECK(cls == HeadingClass::kNone);
    }
  }
}

TEST_CASE("heading shape is unaffected by wrap-around") {
  Config c;
  auto [t, h] = heading_profile({{3, 0}, {4, 90}, {3, 0}});
  for (auto& x : h) x = wrap_angle(x + 3.0);
  const auto s = heading_shape(t, h, c);
  CHECK(s.net_rad == doctest::Approx(kPi / 2).epsilon(1e-9));
  REQUIRE(s.runs_rad.size() == 1);
  CHECK(s.runs_rad[0] == doctest::Approx(kPi / 2).epsilon(1e-9));
}

namespace {

// Integrates a heading profile at 8 m/s into located samples. Returns the
// centre of the arc with the given index.
std::vector<MotionFrameSample> path(const std::vector<Piece>& pieces, std::size_t centre_piece, LatLon& centre) {
  const LocalFrame frame(kOrigin);
  std::vector<MotionFrameSample> out;
  double e = 0, n = 0, heading = 0;
  std::int64_t ms = 0;
  const double v = 8.0, dt = 0.1;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const int steps = static_cast<int>(std::lround(pieces[k].duration_s / dt));
    const double omega = pieces[k].turn_deg * kDegToRad / pieces[k].duration_s;
    if (k == centre_piece) {
      const double r = v / std::abs(omega);
      const double side = omega < 0 ? -1.0 : 1.0;  // centre lies on the turning side
      centre = frame.to_geo({e + side * r * std::cos(heading), n - side * r * std::sin(heading)});
    }
    for (int i = 0; i < steps; ++i) {
      MotionFrameSample s;
      s.timestamp_ms = ms;
      s.location = frame.to_geo({e, n});
      s.heading_rad = wrap_angle(heading);
      out.push_back(s);
      // exact arc step
      const double h1 = heading + omega * dt;
      if (omega == 0.0) {
        e += v * dt * std::sin(heading);
        n += v * dt * std::cos(heading);
      } else {
        e += v / omega * (std::cos(heading) - std::cos(h1));
        n += v / omega * (std::sin(h1) - std::sin(heading));
      }
      heading = h1;
      ms += 100;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("roundabout event is located at the circle centre") {
  Config c;
  LatLon centre{};
  const double circulate_s = 200.0 * kDegToRad / (8.0 / 15.0);  // radius 15 m
  const auto samples = path({{10, 0}, {2, 40}, {circulate_s, -200}, {2, 40}, {10, 0}}, 2, centre);
  const auto events = heading_events(samples, c, nullptr);
  REQUIRE(events.size() == 1);
  CHECK(events[0].cls == HeadingClass::kRoundabout);
  CHECK(haversine_m(events[0].location, centre) < 1.0);
}

TEST_CASE("turn near a mapped junction becomes an intersection turn") {
  Config c;
  LatLon unused{};
  const auto samples = path({{10, 0}, {4, 90}, {10, 0}}, 1, unused);
  const auto free = heading_events(samples, c, nullptr);
  REQUIRE(free.size() == 1);
  CHECK(free[0].cls == HeadingClass::kTurn);

  const LatLon corner = free[0].location;
  const LocalFrame f(corner);
  const RoadNetwork net({{"c", corner}, {"a", f.to_geo({0, -100})}, {"b", f.to_geo({100, 0})}, {"d", f.to_geo({0, 100})}},
                        {{"a", "c"}, {"c", "b"}, {"c", "d"}});
  const NetworkIndex index(net);
  const auto at_junction = heading_events(samples, c, &index);
  REQUIRE(at_junction.size() == 1);
  CHECK(at_junction[0].cls == HeadingClass::kIntersectionTurn);

  const RoadNetwork far({{"c", f.to_geo({500, 500})}, {"a", f.to_geo({500, 400})}, {"b", f.to_geo({600, 500})},
                         {"d", f.to_geo({500, 600})}},
                        {{"a", "c"}, {"c", "b"}, {"c", "d"}});
  const NetworkIndex far_index(far);
  CHECK(heading_events(samples, c, &far_index)[0].cls == HeadingClass::kTurn);
}
