#include "mapsem/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "mapsem/error.hpp"

namespace mapsem {

namespace {

constexpr double kMinGravityMagnetAngleRad = 1.0 * kDegToRad;

std::optional<FrameReference> try_frame(const Vec3& gravity, const Vec3& magnet, double heading_rad) {
  const double gn = norm(gravity);
  const double mn = norm(magnet);
  if (gn == 0.0 || mn == 0.0) return std::nullopt;
  const double cos_angle = std::abs(dot(gravity, magnet)) / (gn * mn);
  if (cos_angle >= std::cos(kMinGravityMagnetAngleRad)) return std::nullopt;
  const Vec3 up = (1.0 / gn) * gravity;
  const Vec3 north = normalized(magnet - dot(magnet, up) * up);
  const Vec3 east = cross(north, up);
  return FrameReference{up, std::cos(heading_rad) * north + std::sin(heading_rad) * east};
}

Vec3 rotate(const Vec3& v, const Vec3& right, const Vec3& forward, const Vec3& up) {
  return {dot(v, right), dot(v, forward), dot(v, up)};
}

}  // namespace

FrameReference frame_from_orientation(const Vec3& gravity, const Vec3& magnet, double heading_rad) {
  auto frame = try_frame(gravity, magnet, heading_rad);
  if (!frame) throw Error(ErrorCode::kDegenerateOrientation, "gravity and magnet within 1 degree of parallel");
  return *frame;
}

MotionFrameSample to_world_frame(const SensorSample& sample, const FrameReference& frame, double heading_rad) {
  const Vec3 right = cross(frame.forward, frame.up);
  MotionFrameSample out;
  out.timestamp_ms = sample.timestamp_ms;
  if (sample.accel) out.accel_world = rotate(*sample.accel, right, frame.forward, frame.up);
  if (sample.magnet) out.magnet_world = rotate(*sample.magnet, right, frame.forward, frame.up);
  if (sample.gravity) {
    out.gravity_y = dot(*sample.gravity, frame.forward);
    out.gravity_z = dot(*sample.gravity, frame.up);
  }
  out.heading_rad = heading_rad;
  out.location = sample.location();
  out.loc_accuracy_m = sample.loc_accuracy_m;
  out.serving_rss_dbm = sample.serving_rss_dbm;
  return out;
}

MotionFrameSample to_world_frame(const SensorSample& sample, double motion_heading_rad) {
  if (!sample.gravity || !sample.magnet) {
    throw Error(ErrorCode::kDegenerateOrientation, "sample lacks gravity or magnet");
  }
  return to_world_frame(sample, frame_from_orientation(*sample.gravity, *sample.magnet, motion_heading_rad),
                        motion_heading_rad);
}

std::optional<FrameReference> estimate_mount(std::span<const SensorSample> samples,
                                             std::span<const double> motion_heading_rad,
                                             std::span<const double> weights) {
  Vec3 up_sum;
  Vec3 forward_sum;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!s.gravity || !s.magnet || !(weights[i] > 0.0)) continue;
    auto frame = try_frame(*s.gravity, *s.magnet, motion_heading_rad[i]);
    if (!frame) continue;
    up_sum += frame->up;
    forward_sum += weights[i] * frame->forward;
    weight_sum += weights[i];
  }
  if (weight_sum <= 0.0) return std::nullopt;
  const Vec3 up = normalized(up_sum);
  const Vec3 forward = forward_sum - dot(forward_sum, up) * up;
  if (norm(forward) == 0.0) return std::nullopt;
  return FrameReference{up, normalized(forward)};
}

std::optional<std::vector<double>> heading_series(std::span<const SensorSample> samples) {
  const std::size_t n = samples.size();
  const bool have_gyro =
      n > 0 && std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.gyro && s.gravity; });
  const bool have_azimuth =
      n > 0 && std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.orientation.has_value(); });
  if (!have_gyro && !have_azimuth) return std::nullopt;

  std::vector<double> heading(n, 0.0);
  if (!have_gyro) {
    for (std::size_t i = 0; i < n; ++i) heading[i] = wrap_angle(samples[i].orientation->azimuth_rad);
    return heading;
  }

  // Clockwise heading decreases with positive yaw about the up axis.
  std::vector<double> integrated(n, 0.0);
  double prev_rate = -dot(*samples[0].gyro, normalized(*samples[0].gravity));
  for (std::size_t i = 1; i < n; ++i) {
    const double rate = -dot(*samples[i].gyro, normalized(*samples[i].gravity));
    const double dt = 1e-3 * static_cast<double>(samples[i].timestamp_ms - samples[i - 1].timestamp_ms);
    integrated[i] = integrated[i - 1] + 0.5 * (rate + prev_rate) * dt;
    prev_rate = rate;
  }
  if (!have_azimuth) {
    for (std::size_t i = 0; i < n; ++i) heading[i] = wrap_angle(integrated[i]);
    return heading;
  }

  // Least-squares drift line through the unwrapped azimuth residual.
  const double t0 = static_cast<double>(samples[0].timestamp_ms);
  double prev = wrap_angle(samples[0].orientation->azimuth_rad - integrated[0]);
  double st = 0.0, sd = 0.0, stt = 0.0, std_ = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = samples[i].orientation->azimuth_rad - integrated[i];
    const double d = i == 0 ? prev : prev + wrap_angle(raw - prev);
    prev = d;
    const double t = 1e-3 * (static_cast<double>(samples[i].timestamp_ms) - t0);
    st += t;
    sd += d;
    stt += t * t;
    std_ += t * d;
  }
  const double count = static_cast<double>(n);
  const double denom = count * stt - st * st;
  const double slope = denom > 0.0 ? (count * std_ - st * sd) / denom : 0.0;
  const double offset = (sd - slope * st) / count;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 1e-3 * (static_cast<double>(samples[i].timestamp_ms) - t0);
    heading[i] = wrap_angle(integrated[i] + offset + slope * t);
  }
  return heading;
}

double variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  // Shifted by the first value so constant input yields exactly zero.
  const double shift = values.front();
  double mean = 0.0;
  for (double v : values) mean += v - shift;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - shift - mean) * (v - shift - mean);
  return acc / static_cast<double>(values.size());
}

std::vector<std::optional<double>> rss_deltas(std::span<const MotionFrameSample> samples, double baseline_s) {
  std::vector<std::optional<double>> out(samples.size());
  const auto baseline_ms = static_cast<std::int64_t>(std::llround(baseline_s * 1000.0));
  std::vector<std::size_t> readings;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].serving_rss_dbm) readings.push_back(i);
  }
  std::vector<double> sorted;
  std::size_t tail = 0;
  for (std::size_t r = 0; r < readings.size(); ++r) {
    const auto& s = samples[readings[r]];
    const double v = *s.serving_rss_dbm;
    sorted.insert(std::lower_bound(sorted.begin(), sorted.end(), v), v);
    while (samples[readings[tail]].timestamp_ms <= s.timestamp_ms - baseline_ms) {
      const double old = *samples[readings[tail]].serving_rss_dbm;
      sorted.erase(std::lower_bound(sorted.begin(), sorted.end(), old));
      ++tail;
    }
    const std::size_t m = sorted.size();
    const double median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    out[readings[r]] = v - median;
  }
  return out;
}

std::vector<WindowFeatures> window_features(std::span<const MotionFrameSample> samples, double window_s,
                                            double overlap, double rss_baseline_s, std::size_t min_samples) {
  std::vector<WindowFeatures> out;
  const std::size_t n = samples.size();
  if (n < 2 || !(window_s > 0.0) || !(overlap >= 0.0 && overlap < 1.0)) return out;

  const auto window_ms = static_cast<std::int64_t>(std::llround(window_s * 1000.0));
  const auto step_ms = std::max<std::int64_t>(1, std::llround(window_s * (1.0 - overlap) * 1000.0));
  const auto deltas = rss_deltas(samples, rss_baseline_s);

  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) cum[i] = cum[i - 1] + haversine_m(samples[i - 1].location, samples[i].location);

  std::vector<double> ax, ay, az, mx, my, gy, gz;
  std::size_t a = 0;
  std::size_t b = 0;
  const std::int64_t t_last = samples.back().timestamp_ms;
  for (std::int64_t ts = samples.front().timestamp_ms; ts + window_ms <= t_last + 1; ts += step_ms) {
    while (a < n && samples[a].timestamp_ms < ts) ++a;
    if (b < a) b = a;
    while (b < n && samples[b].timestamp_ms < ts + window_ms) ++b;
    const std::size_t count = b - a;
    if (count < min_samples || count < 2) continue;

    ax.clear(), ay.clear(), az.clear(), mx.clear(), my.clear(), gy.clear(), gz.clear();
    WindowFeatures w;
    w.t_start_ms = ts;
    w.t_end_ms = ts + window_ms;
    w.first_sample = a;
    w.sample_count = count;
    double heading_net = 0.0;
    for (std::size_t i = a; i < b; ++i) {
      const auto& s = samples[i];
      if (s.accel_world) {
        ax.push_back(s.accel_world->x);
        ay.push_back(s.accel_world->y);
        az.push_back(s.accel_world->z);
      }
      if (s.magnet_world) {
        mx.push_back(s.magnet_world->x);
        my.push_back(s.magnet_world->y);
      }
      if (s.gravity_y && s.gravity_z) {
        gy.push_back(*s.gravity_y);
        gz.push_back(*s.gravity_z);
        w.gravity_y_profile.push_back({cum[i] - cum[a], *s.gravity_y});
      }
      if (deltas[i]) w.rss_delta_db = w.rss_delta_db ? std::min(*w.rss_delta_db, *deltas[i]) : *deltas[i];
      if (i > a) heading_net += wrap_angle(s.heading_rad - samples[i - 1].heading_rad);
    }
    if (ax.size() >= min_samples) w.var_accel = Vec3{variance(ax), variance(ay), variance(az)};
    if (mx.size() >= min_samples) {
      w.var_magnet_x = variance(mx);
      w.var_magnet_y = variance(my);
    }
    if (gy.size() >= min_samples) {
      w.var_gravity_y = variance(gy);
      w.var_gravity_z = variance(gz);
      double mean = 0.0;
      for (double v : gy) mean += v;
      w.mean_gravity_y = mean / static_cast<double>(gy.size());
    }
    w.distance_m = cum[b - 1] - cum[a];
    w.mean_speed_mps = w.distance_m / window_s;
    w.heading_change_rad = std::abs(heading_net);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace mapsem
