#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mapsem/pedestrian.hpp"

using namespace mapsem;

namespace {

WindowFeatures window(double accel_z, double mx, double my, double rss, double distance) {
  WindowFeatures w;
  w.t_start_ms = 0;
  w.t_end_ms = 2000;
  w.var_accel = Vec3{accel_z, accel_z, accel_z};
  w.var_magnet_x = mx;
  w.var_magnet_y = my;
  w.rss_delta_db = rss;
  w.distance_m = distance;
  return w;
}

PedBaseline walking_baseline() {
  PedBaseline b;
  b.magnet_x_var = 0.5;
  b.magnet_y_var = 0.5;
  b.walking_accel_var = 4.0;
  b.walking_steps_per_m = 1.4;
  b.walking_peak = 3.0;
  return b;
}

}  // namespace

TEST_CASE("window tree examples") {
  Config c;
  const auto b = walking_baseline();
  CHECK(classify_ped_window(window(0, 0, 0, 0, 0), {}, PedBaseline{}, c) == PedLabel::kStationary);
  CHECK(classify_ped_window(window(0.5, 0.4, 0.6, 0, 0), {}, b, c) == PedLabel::kStationary);
  CHECK(classify_ped_window(window(0.5, 2.5, 2.5, 0, 0.1), {}, b, c) == PedLabel::kEscalator);
  CHECK(classify_ped_window(window(4.0, 2.5, 2.5, -12, 2.8), {4, 3.0}, b, c) == PedLabel::kUnderpassInterior);
  // X-only magnet disturbance is not an underpass.
  CHECK(classify_ped_window(window(4.0, 2.5, 0.5, -12, 2.8), {4, 3.0}, b, c) == PedLabel::kWalking);
  CHECK(classify_ped_window(window(4.0, 0.5, 0.5, 0, 2.8), {4, 3.0}, b, c) == PedLabel::kWalking);
  CHECK(classify_ped_window(window(6.0, 0.5, 0.5, 0, 1.0), {4, 3.6}, b, c) == PedLabel::kStairsUp);
  // Dense steps with ordinary impacts (a tight corner) stay walking.
  CHECK(classify_ped_window(window(6.0, 0.5, 0.5, 0, 1.0), {4, 3.1}, b, c) == PedLabel::kWalking);
  CHECK(classify_ped_window(window(9.0, 0.5, 0.5, 0, 1.0), {4, 5.4}, b, c) == PedLabel::kStairsDown);
}

TEST_CASE("window tree abstains without required channels") {
  Config c;
  auto w = window(1, 1, 1, 0, 1);
  w.var_magnet_x.reset();
  w.var_magnet_y.reset();
  CHECK_FALSE(classify_ped_window(w, {}, walking_baseline(), c));
  w = window(1, 1, 1, 0, 1);
  w.var_accel.reset();
  CHECK_FALSE(classify_ped_window(w, {}, walking_baseline(), c));
}

TEST_CASE("labels are invariant to acceleration scaling") {
  Config c;
  for (double k : {0.8, 1.0, 1.25}) {
    auto b = walking_baseline();
    b.walking_accel_var = 4.0 * k * k;
    b.walking_peak = 3.0 * k;
    CHECK(classify_ped_window(window(0.5 * k * k, 2.5, 2.5, 0, 0.1), {}, b, c) == PedLabel::kEscalator);
    CHECK(classify_ped_window(window(6.0 * k * k, 0.5, 0.5, 0, 1.0), {4, 3.6 * k}, b, c) == PedLabel::kStairsUp);
    CHECK(classify_ped_window(window(9.0 * k * k, 0.5, 0.5, 0, 1.0), {4, 5.4 * k}, b, c) == PedLabel::kStairsDown);
    CHECK(classify_ped_window(window(4.0 * k * k, 0.5, 0.5, 0, 2.8), {4, 3.0 * k}, b, c) == PedLabel::kWalking);
  }
}

TEST_CASE("lane count uses the minimum crossing") {
  std::vector<double> one{10.5};
  CHECK(lane_count(one, 3.5) == 3);
  std::vector<double> three{14.9, 7.2, 8.0};
  CHECK(lane_count(three, 3.5) == 2);
  std::vector<double> tiny{1.0};
  CHECK(lane_count(tiny, 3.5) == 1);
  CHECK_THROWS_AS(lane_count(std::vector<double>{}, 3.5), Error);

  std::vector<double> growing{14.0};
  int previous = lane_count(growing, 3.5);
  for (double x : {13.0, 15.0, 9.0, 11.0, 6.5}) {
    growing.push_back(x);
    const int now = lane_count(growing, 3.5);
    CHECK(now <= previous);
    previous = now;
  }
}

TEST_CASE("footbridge height") {
  CHECK(footbridge_height_m(12, 0.17) == doctest::Approx(2.04));
  CHECK(footbridge_height_m(15, 0.17) == doctest::Approx(2.55));
  CHECK_THROWS_AS(footbridge_height_m(0, 0.17), Error);
}

TEST_CASE("stair step fit recovers the climb") {
  // Straight north walk: 20 strides of 0.7 m, 15 treads of 0.28 m, 20 strides.
  std::vector<MotionFrameSample> samples;
  std::vector<StepEvent> steps;
  const double deg_per_m = 1.0 / (kEarthRadiusM * kDegToRad);
  double y = 0.0;
  std::int64_t t = 0;
  for (int k = 0; k < 55; ++k) {
    const bool stair = k >= 20 && k < 35;
    y += stair ? 0.28 : 0.7;
    t += stair ? 555 : 500;
    MotionFrameSample s;
    s.timestamp_ms = t;
    s.location = {y * deg_per_m, 0.0};
    samples.push_back(s);
    steps.push_back({t, 3.0});
  }
  const auto n = fit_stair_steps(samples, steps, 0, t, 0.7);
  REQUIRE(n);
  CHECK(*n == 15);
}
