#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mapsem/preprocess.hpp"

using namespace mapsem;

namespace {

struct Rot {
  Vec3 r0, r1, r2;  // rows
  Vec3 apply(const Vec3& v) const { return {dot(r0, v), dot(r1, v), dot(r2, v)}; }
};

Rot random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  double w = g(rng), x = g(rng), y = g(rng), z = g(rng);
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n, x /= n, y /= n, z /= n;
  return {{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
          {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
          {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}};
}

SensorSample flat_north(std::int64_t t) {
  SensorSample s;
  s.timestamp_ms = t;
  s.gravity = Vec3{0, 0, 9.81};
  s.magnet = Vec3{0, 22, -40};
  s.accel = Vec3{0.3, -1.2, 9.9};
  return s;
}

double naive_variance(const std::vector<double>& v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double acc = 0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / v.size();
}

}  // namespace

TEST_CASE("identity orientation leaves vectors unchanged") {
  const auto s = flat_north(0);
  const auto m = to_world_frame(s, 0.0);
  CHECK(m.accel_world->x == doctest::Approx(0.3));
  CHECK(m.accel_world->y == doctest::Approx(-1.2));
  CHECK(m.accel_world->z == doctest::Approx(9.9));
  CHECK(*m.gravity_z == doctest::Approx(9.81));
  CHECK(*m.gravity_y == doctest::Approx(0.0));
}

TEST_CASE("quarter yaw maps device x onto the motion axis") {
  auto s = flat_north(0);
  s.magnet = Vec3{22, 0, -40};  // device x points north
  s.accel = Vec3{1, 0, 0};
  const auto m = to_world_frame(s, 0.0);
  CHECK(m.accel_world->x == doctest::Approx(0.0));
  CHECK(m.accel_world->y == doctest::Approx(1.0));
  CHECK(m.accel_world->z == doctest::Approx(0.0));
}

TEST_CASE("heading turns the frame clockwise from north") {
  auto s = flat_north(0);
  s.accel = Vec3{1, 0, 0};  // east
  const auto m = to_world_frame(s, std::numbers::pi / 2);
  CHECK(m.accel_world->y == doctest::Approx(1.0));
}

TEST_CASE("random orientations preserve norms") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0, 4);
  std::uniform_real_distribution<double> h(-3.1, 3.1);
  for (int i = 0; i < 1000; ++i) {
    const Rot r = random_rotation(rng);
    SensorSample s;
    s.gravity = r.apply({0, 0, 9.81});
    s.magnet = r.apply({0, 22, -40});
    s.accel = Vec3{g(rng), g(rng), g(rng)};
    const auto m = to_world_frame(s, h(rng));
    CHECK(std::abs(norm(*m.accel_world) - norm(*s.accel)) <= 1e-9);
    CHECK(std::abs(norm(*m.magnet_world) - norm(*s.magnet)) <= 1e-9);
    CHECK(*m.gravity_z == doctest::Approx(9.81).epsilon(1e-9));
  }
}

TEST_CASE("parallel gravity and magnet are degenerate") {
  auto s = flat_north(0);
  s.magnet = Vec3{0.0, 0.5, 40.0};  // under 1 degree from gravity
  CHECK_THROWS_AS(to_world_frame(s, 0.0), Error);
  s.magnet = Vec3{0.0, 1.0, 40.0};  // about 1.4 degrees
  CHECK_NOTHROW(to_world_frame(s, 0.0));
}

TEST_CASE("fixed mount keeps along-track gravity deviations") {
  std::mt19937_64 rng(9);
  const Rot r = random_rotation(rng);  // world to device
  std::vector<SensorSample> samples;
  std::vector<double> heading, weight;
  for (int i = 0; i < 200; ++i) {
    SensorSample s;
    s.timestamp_ms = 20 * i;
    const double gy = (i >= 100 && i < 110) ? 0.6 : 0.0;
    s.gravity = r.apply({0, gy, std::sqrt(9.81 * 9.81 - gy * gy)});
    s.magnet = r.apply({0, 22, -40});
    samples.push_back(s);
    heading.push_back(0.0);
    weight.push_back(1.0);
  }
  const auto mount = estimate_mount(samples, heading, weight);
  REQUIRE(mount);
  const auto flat = to_world_frame(samples[0], *mount, 0.0);
  const auto up = to_world_frame(samples[105], *mount, 0.0);
  CHECK(*up.gravity_y - *flat.gravity_y == doctest::Approx(0.6).epsilon(0.02));
}

TEST_CASE("heading series removes gyro drift") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0, 0.03);
  std::vector<SensorSample> samples;
  for (int i = 0; i < 1000; ++i) {
    SensorSample s = flat_north(20 * i);
    const double t = 0.02 * i;
    s.gyro = Vec3{0, 0, -0.1 + 0.01};  // clockwise 0.1 rad/s plus bias
    s.orientation = Orientation{wrap_angle(0.1 * t + noise(rng)), 0, 0};
    samples.push_back(s);
  }
  const auto h = heading_series(samples);
  REQUIRE(h);
  for (int i = 0; i < 1000; i += 50) CHECK(std::abs(wrap_angle((*h)[i] - 0.002 * i)) < 0.02);

  for (auto& s : samples) s.gyro.reset();
  const auto az = heading_series(samples);
  REQUIRE(az);
  CHECK((*az)[10] == doctest::Approx(samples[10].orientation->azimuth_rad));
  for (auto& s : samples) s.orientation.reset();
  CHECK_FALSE(heading_series(samples));
}

TEST_CASE("constant channels give zero variances and zero rss delta") {
  std::vector<MotionFrameSample> m;
  for (int i = 0; i < 500; ++i) {
    MotionFrameSample s;
    s.timestamp_ms = 20 * i;
    s.accel_world = Vec3{0.1, 0.2, 9.8};
    s.magnet_world = Vec3{1, 2, 3};
    s.gravity_y = 0.0;
    s.gravity_z = 9.81;
    if (i % 50 == 0) s.serving_rss_dbm = -80.0;
    m.push_back(s);
  }
  const auto w = window_features(m, 2.0, 0.5);
  REQUIRE(w.size() == 8);  // starts 0..7 s; the window at 8 s would end past 9.98 s
  for (const auto& f : w) {
    CHECK(f.var_accel->x == 0.0);
    CHECK(*f.var_magnet_x == 0.0);
    CHECK(*f.var_gravity_y == 0.0);
    REQUIRE(f.rss_delta_db);
    CHECK(*f.rss_delta_db == 0.0);
    CHECK(f.t_end_ms > f.t_start_ms);
  }
}

TEST_CASE("window variances match a naive oracle and tile the trace") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0, 2);
  std::uniform_int_distribution<int> gap(10, 45);
  std::vector<MotionFrameSample> m;
  std::int64_t t = 5000;
  for (int i = 0; i < 3000; ++i) {
    MotionFrameSample s;
    s.timestamp_ms = t;
    t += gap(rng);
    s.accel_world = Vec3{g(rng), g(rng), 9.8 + g(rng)};
    s.magnet_world = Vec3{g(rng), 20 + g(rng), -40};
    s.gravity_y = g(rng) * 0.1;
    s.gravity_z = 9.8;
    s.location = {0.0, 1e-6 * i};
    m.push_back(s);
  }
  const auto w = window_features(m, 2.0, 0.5);
  REQUIRE(!w.empty());
  for (std::size_t k = 0; k < w.size(); ++k) {
    const auto& f = w[k];
    CHECK((f.t_start_ms - m.front().timestamp_ms) % 1000 == 0);
    if (k > 0) CHECK(f.t_start_ms - w[k - 1].t_start_ms == 1000);
    std::vector<double> ax, mx, gy;
    for (const auto& s : m) {
      if (s.timestamp_ms >= f.t_start_ms && s.timestamp_ms < f.t_end_ms) {
        ax.push_back(s.accel_world->x);
        mx.push_back(s.magnet_world->x);
        gy.push_back(*s.gravity_y);
      }
    }
    CHECK(ax.size() == f.sample_count);
    CHECK(f.var_accel->x == doctest::Approx(naive_variance(ax)).epsilon(1e-9));
    CHECK(*f.var_magnet_x == doctest::Approx(naive_variance(mx)).epsilon(1e-9));
    CHECK(*f.var_gravity_y == doctest::Approx(naive_variance(gy)).epsilon(1e-9));
    CHECK(f.distance_m >= 0.0);
  }
  // Windows cover the trace up to the final partial window.
  CHECK(w.front().t_start_ms == m.front().timestamp_ms);
  CHECK(m.back().timestamp_ms - w.back().t_end_ms < 1000);
}

TEST_CASE("rss step registers as a drop against the trailing median") {
  std::vector<MotionFrameSample> m;
  for (int i = 0; i < 130 * 50; ++i) {
    MotionFrameSample s;
    s.timestamp_ms = 20 * i;
    s.accel_world = Vec3{0, 0, 9.8};
    if (i % 50 == 0) s.serving_rss_dbm = i < 100 * 50 ? -75.0 : -90.0;
    m.push_back(s);
  }
  const auto w = window_features(m, 2.0, 0.5);
  double min_in_step = 0.0;
  for (const auto& f : w) {
    if (f.t_start_ms >= 100000 && f.rss_delta_db) min_in_step = std::min(min_in_step, *f.rss_delta_db);
    if (f.t_end_ms <= 100000 && f.rss_delta_db) CHECK(*f.rss_delta_db == 0.0);
  }
  CHECK(min_in_step == doctest::Approx(-15.0).epsilon(0.5 / 15));
}

TEST_CASE("sparse windows are skipped") {
  std::vector<MotionFrameSample> m;
  for (int i = 0; i < 10; ++i) {
    MotionFrameSample s;
    s.timestamp_ms = 1000 * i;
    m.push_back(s);
  }
  CHECK(window_features(m, 2.0, 0.5).empty());
}
