#include "mapsem/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "mapsem/error.hpp"
#include "mapsem/preprocess.hpp"

namespace mapsem {

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kPedestrian: return "pedestrian";
    case Mode::kVehicle: return "vehicle";
    case Mode::kOther: return "other";
  }
  return "other";
}

std::vector<Trace> filter_indoor(const Trace& trace, const Config& config) {
  std::vector<Trace> out;
  if (trace.declared_indoor.value_or(false)) return out;
  const auto& s = trace.samples;
  const auto min_ms = static_cast<std::int64_t>(std::llround(config.indoor_min_duration_s * 1000.0));

  std::vector<bool> keep(s.size(), true);
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i].loc_accuracy_m <= config.indoor_accuracy_m) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < s.size() && s[j + 1].loc_accuracy_m > config.indoor_accuracy_m) ++j;
    if (s[j].timestamp_ms - s[i].timestamp_ms > min_ms) std::fill(keep.begin() + i, keep.begin() + j + 1, false);
    i = j + 1;
  }

  Trace piece{trace.trace_id, {}, trace.declared_indoor};
  auto flush = [&] {
    if (piece.samples.size() >= 2) out.push_back(piece);
    piece.samples.clear();
  };
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (keep[k]) {
      piece.samples.push_back(s[k]);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

std::vector<TrackPoint> track_kinematics(std::span<const SensorSample> samples, const Config& config) {
  std::vector<TrackPoint> track;
  if (samples.empty()) return track;
  const std::int64_t t0 = samples.front().timestamp_ms;
  std::int64_t last_bucket = -1;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::int64_t bucket = (samples[i].timestamp_ms - t0) / 1000;
    if (bucket == last_bucket) continue;
    last_bucket = bucket;
    track.push_back({samples[i].timestamp_ms, i, samples[i].location(), 0.0, 0.0, 0.0});
  }
  const std::size_t n = track.size();
  if (n < 2) return track;

  const LatLon origin = track.front().location;
  std::vector<TimedValue> lat(n), lon(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 1e-3 * static_cast<double>(track[i].timestamp_ms - t0);
    lat[i] = {t, track[i].location.lat_deg - origin.lat_deg};
    lon[i] = {t, track[i].location.lon_deg - origin.lon_deg};
  }
  const auto q = static_cast<std::size_t>(std::max(2.0, config.position_smoothing_points));
  const auto slat = lowess_smooth_k(lat, q);
  const auto slon = lowess_smooth_k(lon, q);
  for (std::size_t i = 0; i < n; ++i) {
    track[i].location = {origin.lat_deg + slat[i].value, origin.lon_deg + slon[i].value};
  }

  auto diff_index = [n](std::size_t i) {
    return std::pair<std::size_t, std::size_t>{i == 0 ? 0 : i - 1, i + 1 == n ? n - 1 : i + 1};
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] = diff_index(i);
    const double dt = 1e-3 * static_cast<double>(track[b].timestamp_ms - track[a].timestamp_ms);
    track[i].speed_mps = haversine_m(track[a].location, track[b].location) / dt;
    track[i].heading_rad = bearing_rad(track[a].location, track[b].location);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, b] = diff_index(i);
    const double dt = 1e-3 * static_cast<double>(track[b].timestamp_ms - track[a].timestamp_ms);
    track[i].accel_mps2 = (track[b].speed_mps - track[a].speed_mps) / dt;
  }
  return track;
}

ModeFeatures mode_features(std::span<const TrackPoint> track, double stop_speed_mps) {
  ModeFeatures f;
  const std::size_t n = track.size();
  if (n == 0) return f;
  std::vector<double> speeds, accels;
  double sum = 0.0;
  std::size_t stops = 0;
  for (const auto& p : track) {
    speeds.push_back(p.speed_mps);
    accels.push_back(std::abs(p.accel_mps2));
    sum += p.speed_mps;
    if (p.speed_mps < stop_speed_mps) ++stops;
  }
  f.stop_rate = static_cast<double>(stops) / static_cast<double>(n);
  f.mean_velocity = sum / static_cast<double>(n);
  f.velocity_variance = variance(speeds);
  double turn = 0.0, vchange = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    f.segment_length_m += haversine_m(track[i - 1].location, track[i].location);
    if (track[i].speed_mps >= stop_speed_mps && track[i - 1].speed_mps >= stop_speed_mps) {
      turn += std::abs(wrap_angle(track[i].heading_rad - track[i - 1].heading_rad));
    }
    vchange += std::abs(track[i].speed_mps - track[i - 1].speed_mps) / std::max(track[i - 1].speed_mps, stop_speed_mps);
  }
  const double duration = 1e-3 * static_cast<double>(track.back().timestamp_ms - track.front().timestamp_ms);
  if (duration > 0.0) {
    f.heading_change_rate = turn / duration;
    f.velocity_change_rate = vchange / duration;
  }
  std::sort(speeds.rbegin(), speeds.rend());
  std::sort(accels.rbegin(), accels.rend());
  for (std::size_t i = 0; i < 3 && i < n; ++i) {
    f.max_velocity[i] = speeds[i];
    f.max_accel[i] = accels[i];
  }
  return f;
}

Mode classify_mode(const ModeFeatures& f, double stepping_fraction, const Config& config) {
  if (f.mean_velocity < config.ped_max_mean_speed_mps && f.max_velocity[0] < config.ped_max_peak_speed_mps &&
      stepping_fraction >= config.step_oscillation_min_fraction) {
    return Mode::kPedestrian;
  }
  if (f.mean_velocity > config.veh_min_mean_speed_mps || f.max_velocity[0] > config.veh_min_peak_speed_mps) {
    return Mode::kVehicle;
  }
  return Mode::kOther;
}

std::vector<TimedValue> vertical_accel(std::span<const SensorSample> samples) {
  std::vector<TimedValue> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.accel || !s.gravity) continue;
    out.push_back({1e-3 * static_cast<double>(s.timestamp_ms), dot(*s.accel, normalized(*s.gravity))});
  }
  return out;
}

std::vector<std::pair<std::int64_t, bool>> stepping_blocks(std::span<const TimedValue> vertical,
                                                           const Config& config) {
  std::vector<std::pair<std::int64_t, bool>> out;
  if (vertical.empty()) return out;
  const double block = config.step_block_s;
  std::size_t a = 0;
  std::vector<double> x;
  for (double start = vertical.front().t; a < vertical.size(); start += block) {
    std::size_t b = a;
    while (b < vertical.size() && vertical[b].t < start + block) ++b;
    const std::size_t m = b - a;
    bool stepping = false;
    if (m >= 8) {
      x.assign(m, 0.0);
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += vertical[a + i].value;
      mean /= static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) x[i] = vertical[a + i].value - mean;
      const double dt = (vertical[b - 1].t - vertical[a].t) / static_cast<double>(m - 1);
      const auto lag0 = static_cast<std::size_t>(std::max(1.0, std::ceil(0.3 / dt)));
      const auto lag1 = std::min(m - 2, static_cast<std::size_t>(std::floor(1.2 / dt)));
      double best = -1.0;
      for (std::size_t lag = lag0; lag <= lag1; ++lag) {
        double xy = 0.0, xx = 0.0, yy = 0.0;
        for (std::size_t i = 0; i + lag < m; ++i) {
          xy += x[i] * x[i + lag];
          xx += x[i] * x[i];
          yy += x[i + lag] * x[i + lag];
        }
        if (xx > 0.0 && yy > 0.0) best = std::max(best, xy / std::sqrt(xx * yy));
      }
      stepping = best >= config.step_regularity_min;
    }
    out.push_back({std::llround(start * 1000.0), stepping});
    a = b;
  }
  return out;
}

namespace {

enum class PointState { kWalk, kVehicle, kAmbiguous, kIdle };

struct Run {
  PointState state;
  std::size_t first;  // track point indices [first, last]
  std::size_t last;
};

double run_duration_s(const std::vector<TrackPoint>& track, const Run& r, bool is_last) {
  const std::int64_t end = is_last ? track[r.last].timestamp_ms + 1000 : track[r.last + 1].timestamp_ms;
  return 1e-3 * static_cast<double>(end - track[r.first].timestamp_ms);
}

std::vector<Run> make_runs(const std::vector<PointState>& states) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!runs.empty() && runs.back().state == states[i]) {
      runs.back().last = i;
    } else {
      runs.push_back({states[i], i, i});
    }
  }
  return runs;
}

void merge_equal_neighbours(std::vector<Run>& runs) {
  std::vector<Run> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && merged.back().state == r.state) {
      merged.back().last = r.last;
    } else {
      merged.push_back(r);
    }
  }
  runs.swap(merged);
}

}  // namespace

std::vector<Segment> segment_and_classify_mode(const Trace& trace, const Config& config) {
  std::vector<Segment> segments;
  const auto& samples = trace.samples;
  if (samples.empty()) return segments;
  const auto track = track_kinematics(samples, config);
  const auto vertical = vertical_accel(samples);
  const auto blocks = stepping_blocks(vertical, config);

  std::vector<bool> stepping(track.size(), false);
  for (std::size_t i = 0; i < track.size(); ++i) {
    auto it = std::upper_bound(blocks.begin(), blocks.end(), track[i].timestamp_ms,
                               [](std::int64_t t, const auto& b) { return t < b.first; });
    if (it != blocks.begin()) stepping[i] = std::prev(it)->second;
  }

  std::vector<PointState> states(track.size(), PointState::kAmbiguous);
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (track[i].speed_mps > config.ped_speed_bound_mps || std::abs(track[i].accel_mps2) > config.ped_accel_bound_mps2) {
      states[i] = PointState::kVehicle;
    } else if (stepping[i]) {
      states[i] = PointState::kWalk;
    }
  }
  // Ambiguous points inherit the previous decided state; leading ones the
  // first decided state; a fully ambiguous trace is idle.
  auto first_decided = std::find_if(states.begin(), states.end(), [](auto s) { return s != PointState::kAmbiguous; });
  PointState carry = first_decided == states.end() ? PointState::kIdle : *first_decided;
  for (auto& s : states) {
    if (s == PointState::kAmbiguous) {
      s = carry;
    } else {
      carry = s;
    }
  }

  auto runs = make_runs(states);
  while (runs.size() > 1) {
    std::size_t shortest = runs.size();
    double shortest_s = config.min_segment_s;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const double d = run_duration_s(track, runs[r], r + 1 == runs.size());
      if (d < shortest_s) {
        shortest_s = d;
        shortest = r;
      }
    }
    if (shortest == runs.size()) break;
    std::size_t target;
    if (shortest == 0) {
      target = 1;
    } else if (shortest + 1 == runs.size()) {
      target = shortest - 1;
    } else {
      const double before = run_duration_s(track, runs[shortest - 1], false);
      const double after = run_duration_s(track, runs[shortest + 1], shortest + 2 == runs.size());
      target = after > before ? shortest + 1 : shortest - 1;
    }
    runs[shortest].state = runs[target].state;
    merge_equal_neighbours(runs);
  }

  auto build = [&](std::size_t first, std::size_t last) {
    Segment seg;
    seg.trace_id = trace.trace_id;
    seg.begin = first == 0 ? 0 : track[first].sample;
    seg.end = last + 1 == track.size() ? samples.size() : track[last + 1].sample;
    const std::span<const TrackPoint> part(track.data() + first, last - first + 1);
    seg.features = mode_features(part, config.stop_speed_mps);
    std::size_t stepping_points = 0;
    for (std::size_t i = first; i <= last; ++i) stepping_points += stepping[i] ? 1 : 0;
    seg.stepping_fraction = static_cast<double>(stepping_points) / static_cast<double>(last - first + 1);
    seg.mode = classify_mode(seg.features, seg.stepping_fraction, config);
    return seg;
  };

  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (const auto& r : runs) spans.push_back({r.first, r.last});
  for (const auto& [first, last] : spans) {
    Segment seg = build(first, last);
    if (!segments.empty() && segments.back().mode == seg.mode) {
      // Adjacent pieces of the same mode are rejoined and re-measured.
      const std::size_t prev_first =
          std::lower_bound(track.begin(), track.end(), segments.back().begin,
                           [](const TrackPoint& p, std::size_t s) { return p.sample < s; }) - track.begin();
      segments.back() = build(prev_first, last);
    } else {
      segments.push_back(std::move(seg));
    }
  }
  return segments;
}

std::vector<StepEvent> detect_steps(std::span<const TimedValue> signal, double k, double window_s, double min_gap_s) {
  std::vector<StepEvent> out;
  const std::size_t n = signal.size();
  if (n < 3) return out;

  double centre = 0.0;
  for (const auto& p : signal) centre += p.value;
  centre /= static_cast<double>(n);

  // Centered rolling mean and std over [t - w/2, t + w/2].
  std::vector<double> mean(n), stdev(n);
  std::size_t lo = 0, hi = 0;
  double s1 = 0.0, s2 = 0.0;
  const double half = window_s / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    while (hi < n && signal[hi].t <= signal[i].t + half) {
      const double v = signal[hi].value - centre;
      s1 += v;
      s2 += v * v;
      ++hi;
    }
    while (signal[lo].t < signal[i].t - half) {
      const double v = signal[lo].value - centre;
      s1 -= v;
      s2 -= v * v;
      ++lo;
    }
    const double m = static_cast<double>(hi - lo);
    const double mu = s1 / m;
    mean[i] = mu + centre;
    stdev[i] = std::sqrt(std::max(0.0, s2 / m - mu * mu));
  }

  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double v = signal[i].value;
    if (!(v > signal[i - 1].value && v >= signal[i + 1].value)) continue;
    if (!(stdev[i] > 0.0) || !(v > mean[i] + k * stdev[i])) continue;
    const StepEvent e{std::llround(signal[i].t * 1000.0), v - mean[i]};
    if (!out.empty() && signal[i].t - 1e-3 * static_cast<double>(out.back().timestamp_ms) < min_gap_s) {
      if (e.peak_accel_mps2 > out.back().peak_accel_mps2) out.back() = e;
      continue;
    }
    out.push_back(e);
  }
  return out;
}

std::vector<StepEvent> detect_steps(std::span<const SensorSample> samples, const Config& config) {
  const auto vertical = vertical_accel(samples);
  if (vertical.size() < 3) return {};
  const double duration = vertical.back().t - vertical.front().t;
  const double rate = static_cast<double>(vertical.size() - 1) / duration;
  const auto q = static_cast<std::size_t>(std::max(5.0, std::round(config.accel_smoothing_s * rate)));
  const auto smooth = lowess_smooth_k(vertical, q);
  auto steps = detect_steps(smooth, config.step_k, config.step_window_s, config.step_min_gap_s);
  std::erase_if(steps, [&](const StepEvent& e) { return e.peak_accel_mps2 < config.step_min_peak_mps2; });
  return steps;
}

}  // namespace mapsem
