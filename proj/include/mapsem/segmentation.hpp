#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mapsem/config.hpp"
#include "mapsem/lowess.hpp"
#include "mapsem/network_index.hpp"
#include "mapsem/trace.hpp"

namespace mapsem {

enum class Mode { kPedestrian, kVehicle, kOther };
std::string_view mode_name(Mode mode);

struct StepEvent {
  std::int64_t timestamp_ms{0};
  double peak_accel_mps2{0.0};  // height above the rolling mean
};

struct ModeFeatures {
  double stop_rate{0.0};
  double heading_change_rate{0.0};    // rad/s
  double velocity_change_rate{0.0};   // 1/s
  double segment_length_m{0.0};
  double max_velocity[3]{0.0, 0.0, 0.0};
  double max_accel[3]{0.0, 0.0, 0.0};
  double mean_velocity{0.0};
  double velocity_variance{0.0};
};

struct Segment {
  std::string trace_id;
  std::size_t begin{0};  // sample range [begin, end)
  std::size_t end{0};
  Mode mode{Mode::kOther};
  ModeFeatures features;
  double stepping_fraction{0.0};
  std::vector<LatLon> snapped;   // vehicle segments, one per sample
  std::vector<StepEvent> steps;  // pedestrian segments
};

/// Outdoor portions of a trace. Declared-indoor traces vanish entirely; spans
/// whose location accuracy stays above the indoor threshold for longer than
/// the configured duration are cut out. Pieces shorter than 2 samples drop.
std::vector<Trace> filter_indoor(const Trace& trace, const Config& config);

/// Decimated, smoothed kinematic track.
struct TrackPoint {
  std::int64_t timestamp_ms{0};
  std::size_t sample{0};
  LatLon location{};
  double speed_mps{0.0};
  double accel_mps2{0.0};
  double heading_rad{0.0};
};

/// One point per second of trace, positions LOWESS-smoothed, speeds and
/// accelerations by central differences.
std::vector<TrackPoint> track_kinematics(std::span<const SensorSample> samples, const Config& config);

ModeFeatures mode_features(std::span<const TrackPoint> track, double stop_speed_mps);

/// Fixed decision tree over the features and the fraction of the segment
/// showing step oscillation.
Mode classify_mode(const ModeFeatures& f, double stepping_fraction, const Config& config);

/// Vertical acceleration (accel projected on the gravity direction) for
/// samples carrying both channels.
std::vector<TimedValue> vertical_accel(std::span<const SensorSample> samples);

/// Per-block step oscillation flags: blocks of `step_block_s` whose
/// normalized autocorrelation peaks at or above `step_regularity_min` at a
/// lag between 0.3 s and 1.2 s. Returns (block start ms, flag) pairs.
std::vector<std::pair<std::int64_t, bool>> stepping_blocks(std::span<const TimedValue> vertical, const Config& config);

/// Splits at walk/vehicle change points and classifies each piece. The
/// returned segments partition the trace's samples.
std::vector<Segment> segment_and_classify_mode(const Trace& trace, const Config& config);

/// Adaptive peak detector: local maxima above rolling mean + k * rolling std
/// (centered window), at least `min_gap_s` apart. Input times are seconds.
std::vector<StepEvent> detect_steps(std::span<const TimedValue> signal, double k, double window_s, double min_gap_s);

/// Steps of a pedestrian sample span, using smoothed vertical acceleration.
/// Peaks under step_min_peak_mps2 are dropped as sensor noise.
std::vector<StepEvent> detect_steps(std::span<const SensorSample> samples, const Config& config);

}  // namespace mapsem
