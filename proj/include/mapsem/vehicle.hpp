#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mapsem/config.hpp"
#include "mapsem/network_index.hpp"
#include "mapsem/preprocess.hpp"
#include "mapsem/semantics.hpp"

namespace mapsem {

/// Smooth-road reference for one window: rolling medians of the window
/// statistics over veh_baseline_s.
struct VehBaseline {
  double var_gravity_y{0.0};
  double var_gravity_z{0.0};
  double var_accel_x{0.0};
  double var_magnet_x{0.0};
  double var_magnet_y{0.0};
  double mean_gravity_y{0.0};
};

std::vector<VehBaseline> veh_baselines(std::span<const WindowFeatures> windows, const Config& config);

bool window_anomalous(const WindowFeatures& w, const VehBaseline& b, const Config& config);

/// Inclusive sample index range.
struct Extent {
  std::size_t first{0};
  std::size_t last{0};
};

/// A merged run of anomalous windows with its sample-level extents:
/// `vibration` from detrended gravity y/z and lateral acceleration,
/// `trend` from the slow along-track gravity component.
struct VehEventRun {
  std::size_t w0{0};
  std::size_t w1{0};
  std::int64_t t0{0};
  std::int64_t t1{0};
  std::optional<Extent> vibration;
  std::optional<Extent> trend;
};

/// Per-sample signals shared by run detection and classification.
struct VehSignals {
  std::span<const MotionFrameSample> samples;
  std::span<const WindowFeatures> windows;
  std::span<const VehBaseline> baselines;
  std::vector<double> cum_m;          // path length at each sample
  std::vector<double> vib_gy, vib_gz, vib_ax;  // detrended
  std::vector<double> trend_gy;       // moving average of gravity y
  std::vector<std::size_t> window_of; // nearest window for each sample
};

VehSignals veh_signals(std::span<const MotionFrameSample> samples, std::span<const WindowFeatures> windows,
                       std::span<const VehBaseline> baselines, const Config& config);

std::vector<VehEventRun> anomaly_runs(const VehSignals& s, const Config& config);

/// Decision tree over one run. `index` may be null; it only adds the railway
/// confidence boost. Returns nullopt for "none" and when a required channel
/// is absent.
std::optional<SemanticDetection> classify_veh_event(const VehEventRun& run, const VehSignals& s,
                                                    const std::string& trace_id, const Config& config,
                                                    const NetworkIndex* index);

/// Windows, baselines, runs and the tree for one vehicle segment.
std::vector<SemanticDetection> vehicle_event_semantics(const std::string& trace_id,
                                                       std::span<const MotionFrameSample> samples,
                                                       const Config& config, const NetworkIndex* index);

enum class HeadingClass { kNone, kCurve, kTurn, kIntersectionTurn, kRoundabout };

struct HeadingShape {
  double net_rad{0.0};
  std::vector<double> runs_rad;  // summed rotation of each same-sign run
};

/// Net rotation and the same-sign rotation runs of a heading series
/// (seconds, radians). Only stretches turning faster than the configured
/// rate count towards runs.
HeadingShape heading_shape(std::span<const double> t_s, std::span<const double> heading_rad, const Config& config);

HeadingClass classify_heading_feature(const HeadingShape& shape, bool junction_nearby, const Config& config);

struct HeadingEvent {
  std::size_t first{0};
  std::size_t last{0};
  HeadingShape shape;
  HeadingClass cls{HeadingClass::kNone};
  LatLon location{};
};

/// Spans of sustained turning, merged across short gaps and padded, each
/// classified. `index` provides the junction check and may be null.
std::vector<HeadingEvent> heading_events(std::span<const MotionFrameSample> samples, const Config& config,
                                         const NetworkIndex* index);

}  // namespace mapsem
