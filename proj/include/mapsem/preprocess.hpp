#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mapsem/config.hpp"
#include "mapsem/geo.hpp"
#include "mapsem/trace.hpp"

namespace mapsem {

/// Device-frame unit vectors of the motion frame: `up` is vertical, `forward`
/// the horizontal direction of travel. X (right of motion) = forward x up.
struct FrameReference {
  Vec3 up{0.0, 0.0, 1.0};
  Vec3 forward{0.0, 1.0, 0.0};
};

/// Builds the frame from gravity (down reference) and magnetic north, then
/// turns it about the vertical by `heading_rad` (clockwise from north) so that
/// forward points along the motion. Throws Error(kDegenerateOrientation) when
/// gravity and magnet are within 1 degree of parallel.
FrameReference frame_from_orientation(const Vec3& gravity, const Vec3& magnet, double heading_rad);

/// A sample expressed in the motion frame (X right of motion, Y along motion,
/// Z up), with the pass-through fields later stages need.
struct MotionFrameSample {
  std::int64_t timestamp_ms{0};
  std::optional<Vec3> accel_world;
  std::optional<Vec3> magnet_world;
  std::optional<double> gravity_y;
  std::optional<double> gravity_z;
  double heading_rad{0.0};
  LatLon location{};
  double loc_accuracy_m{0.0};
  std::optional<double> serving_rss_dbm;
};

/// Rotates the sample's vectors into `frame`. Norms are preserved.
MotionFrameSample to_world_frame(const SensorSample& sample, const FrameReference& frame, double heading_rad);

/// Per-sample transform using the sample's own gravity and magnet. The sample
/// must carry both; `motion_heading_rad` is the direction of travel.
MotionFrameSample to_world_frame(const SensorSample& sample, double motion_heading_rad);

/// Fixed device mounting over a span: up is the mean gravity direction and
/// forward the weighted mean of the per-sample motion-aligned forward vectors.
/// Samples lacking gravity or magnet, or with zero weight, are skipped.
/// Returns nullopt when no sample qualifies.
std::optional<FrameReference> estimate_mount(std::span<const SensorSample> samples,
                                             std::span<const double> motion_heading_rad,
                                             std::span<const double> weights);

/// Heading (clockwise from north) per sample. Gyro yaw rate is integrated and
/// its drift removed by a least-squares line against the orientation azimuth;
/// without gyro the azimuth is used directly. Returns nullopt when neither
/// channel is available.
std::optional<std::vector<double>> heading_series(std::span<const SensorSample> samples);

/// Sliding-window statistics shared by both classifiers.
struct WindowFeatures {
  std::int64_t t_start_ms{0};
  std::int64_t t_end_ms{0};
  std::size_t first_sample{0};
  std::size_t sample_count{0};
  std::optional<Vec3> var_accel;
  std::optional<double> var_magnet_x;
  std::optional<double> var_magnet_y;
  std::optional<double> var_gravity_y;
  std::optional<double> var_gravity_z;
  std::optional<double> mean_gravity_y;
  /// Minimum of serving RSS minus its trailing median within the window;
  /// absent when the window holds no RSS reading.
  std::optional<double> rss_delta_db;
  double mean_speed_mps{0.0};
  double heading_change_rad{0.0};
  double distance_m{0.0};
  struct ProfilePoint {
    double offset_m;
    double gravity_y;
  };
  std::vector<ProfilePoint> gravity_y_profile;
};

/// Serving RSS minus the median of the readings in the trailing
/// `baseline_s` seconds (inclusive), one value per sample carrying RSS.
std::vector<std::optional<double>> rss_deltas(std::span<const MotionFrameSample> samples, double baseline_s);

/// Time-based windows of `window_s` stepping by window_s * (1 - overlap).
/// Windows with fewer than `min_samples` samples are skipped.
std::vector<WindowFeatures> window_features(std::span<const MotionFrameSample> samples, double window_s,
                                            double overlap, double rss_baseline_s = 60.0,
                                            std::size_t min_samples = 4);

/// Two-pass population variance.
double variance(std::span<const double> values);

}  // namespace mapsem
