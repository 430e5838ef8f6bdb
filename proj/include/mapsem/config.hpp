#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mapsem {

/// Every tunable threshold of the pipeline. Serialized as one flat JSON
/// object of named numbers; missing keys keep their defaults.
struct Config {
  // preprocess
  double window_s = 2.0;
  double window_overlap = 0.5;
  double min_window_samples = 4;
  double rss_baseline_s = 60.0;
  double lowess_span = 0.1;
  double position_smoothing_points = 5;
  double accel_smoothing_s = 0.12;

  // segmentation
  double indoor_accuracy_m = 100.0;
  double indoor_min_duration_s = 30.0;
  double ped_speed_bound_mps = 3.0;
  double ped_accel_bound_mps2 = 2.5;
  double min_segment_s = 10.0;
  double stop_speed_mps = 0.5;
  double step_regularity_min = 0.5;
  double step_block_s = 4.0;
  double step_oscillation_min_fraction = 0.3;
  double ped_max_mean_speed_mps = 2.5;
  double ped_max_peak_speed_mps = 4.0;
  double veh_min_mean_speed_mps = 4.0;
  double veh_min_peak_speed_mps = 8.0;
  double step_k = 1.0;
  double step_window_s = 2.0;
  double step_min_gap_s = 0.25;
  double step_min_peak_mps2 = 0.3;
  double snap_radius_m = 50.0;

  // pedestrian semantics
  double rss_drop_db = -10.0;
  double ped_magnet_high_ratio = 4.0;
  double ped_accel_low_ratio = 0.5;
  double stairs_steps_per_m_ratio = 1.3;
  double stairs_down_peak_ratio = 1.4;
  double stairs_min_peak_ratio = 1.15;
  double ped_baseline_quantile = 0.25;
  double ped_baseline_s = 120.0;
  double stepping_min_steps = 2;
  double stepping_min_peak_ratio = 0.3;
  double crosswalk_max_angle_deg = 60.0;
  double footbridge_max_deck_m = 80.0;
  double structure_max_gap_s = 4.0;
  double lane_width_m = 3.5;
  double step_rise_m = 0.17;

  // vehicle semantics
  double veh_baseline_s = 60.0;
  double anomaly_ratio = 3.0;
  double bridge_mean_k = 4.0;
  double extent_k = 5.0;
  double vibration_detrend_s = 1.0;
  double run_merge_gap_m = 15.0;
  double short_max_m = 10.0;
  double railway_min_m = 10.0;
  double railway_max_m = 30.0;
  double bridge_min_m = 50.0;
  double bridge_lobe_fraction = 0.2;
  double bridge_prominence = 2.0;
  double tunnel_magnet_x_ratio = 4.0;
  double tunnel_magnet_y_max_ratio = 2.0;
  double cats_eye_max_yz_ratio = 2.5;
  double cats_eye_min_x_ratio = 4.0;
  double railway_min_yz_ratio = 6.0;
  double bump_min_yz_ratio = 30.0;
  double railway_map_radius_m = 30.0;
  double turn_rate_min_rad_s = 0.08;
  double heading_event_gap_s = 3.0;
  double heading_event_pad_s = 2.0;
  double turn_net_min_deg = 60.0;
  double turn_net_max_deg = 120.0;
  double curve_net_max_deg = 30.0;
  double roundabout_opposing_min_deg = 25.0;
  double roundabout_major_min_deg = 60.0;
  double junction_radius_m = 40.0;
  double slowdown_speed_mps = 3.0;
  double approach_window_m = 30.0;
  double approach_pass_radius_m = 20.0;
  double potential_stop_ratio = 0.80;
  double potential_light_ratio = 0.15;
  double min_traces = 5;
  double stop_line_offset_m = 8.0;

  // aggregation
  double eps_vehicle_m = 15.0;
  double eps_pedestrian_m = 8.0;
  double min_pts = 3;
  double min_support = 3;

  // evaluation
  double match_radius_m = 20.0;

  static Config defaults() { return Config{}; }

  /// Names of every key, in serialization order.
  static std::vector<std::string_view> keys();

  nlohmann::ordered_json to_json() const;
  /// Unknown keys and non-numeric values raise Error(kParse).
  static Config from_json(const nlohmann::json& j);
  static Config load(const std::string& path);

  /// FNV-1a 64 of the canonical JSON text, hex encoded.
  std::string hash() const;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace mapsem
