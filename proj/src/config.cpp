#include "mapsem/config.hpp"

#include <array>
#include <cstdio>
#include <utility>

#include "mapsem/error.hpp"
#include "mapsem/trace_io.hpp"

namespace mapsem {

namespace {

using Field = std::pair<std::string_view, double Config::*>;

const auto& fields() {
  static const std::array kFields{
    Field{"window_s", &Config::window_s},
    Field{"window_overlap", &Config::window_overlap},
    Field{"min_window_samples", &Config::min_window_samples},
    Field{"rss_baseline_s", &Config::rss_baseline_s},
    Field{"lowess_span", &Config::lowess_span},
    Field{"position_smoothing_points", &Config::position_smoothing_points},
    Field{"accel_smoothing_s", &Config::accel_smoothing_s},
    Field{"indoor_accuracy_m", &Config::indoor_accuracy_m},
    Field{"indoor_min_duration_s", &Config::indoor_min_duration_s},
    Field{"ped_speed_bound_mps", &Config::ped_speed_bound_mps},
    Field{"ped_accel_bound_mps2", &Config::ped_accel_bound_mps2},
    Field{"min_segment_s", &Config::min_segment_s},
    Field{"stop_speed_mps", &Config::stop_speed_mps},
    Field{"step_regularity_min", &Config::step_regularity_min},
    Field{"step_block_s", &Config::step_block_s},
    Field{"step_oscillation_min_fraction", &Config::step_oscillation_min_fraction},
    Field{"ped_max_mean_speed_mps", &Config::ped_max_mean_speed_mps},
    Field{"ped_max_peak_speed_mps", &Config::ped_max_peak_speed_mps},
    Field{"veh_min_mean_speed_mps", &Config::veh_min_mean_speed_mps},
    Field{"veh_min_peak_speed_mps", &Config::veh_min_peak_speed_mps},
    Field{"step_k", &Config::step_k},
    Field{"step_window_s", &Config::step_window_s},
    Field{"step_min_gap_s", &Config::step_min_gap_s},
    Field{"step_min_peak_mps2", &Config::step_min_peak_mps2},
    Field{"snap_radius_m", &Config::snap_radius_m},
    Field{"rss_drop_db", &Config::rss_drop_db},
    Field{"ped_magnet_high_ratio", &Config::ped_magnet_high_ratio},
    Field{"ped_accel_low_ratio", &Config::ped_accel_low_ratio},
    Field{"stairs_steps_per_m_ratio", &Config::stairs_steps_per_m_ratio},
    Field{"stairs_down_peak_ratio", &Config::stairs_down_peak_ratio},
    Field{"stairs_min_peak_ratio", &Config::stairs_min_peak_ratio},
    Field{"ped_baseline_quantile", &Config::ped_baseline_quantile},
    Field{"ped_baseline_s", &Config::ped_baseline_s},
    Field{"stepping_min_steps", &Config::stepping_min_steps},
    Field{"stepping_min_peak_ratio", &Config::stepping_min_peak_ratio},
    Field{"crosswalk_max_angle_deg", &Config::crosswalk_max_angle_deg},
    Field{"footbridge_max_deck_m", &Config::footbridge_max_deck_m},
    Field{"structure_max_gap_s", &Config::structure_max_gap_s},
    Field{"lane_width_m", &Config::lane_width_m},
    Field{"step_rise_m", &Config::step_rise_m},
    Field{"veh_baseline_s", &Config::veh_baseline_s},
    Field{"anomaly_ratio", &Config::anomaly_ratio},
    Field{"bridge_mean_k", &Config::bridge_mean_k},
    Field{"extent_k", &Config::extent_k},
    Field{"vibration_detrend_s", &Config::vibration_detrend_s},
    Field{"run_merge_gap_m", &Config::run_merge_gap_m},
    Field{"short_max_m", &Config::short_max_m},
    Field{"railway_min_m", &Config::railway_min_m},
    Field{"railway_max_m", &Config::railway_max_m},
    Field{"bridge_min_m", &Config::bridge_min_m},
    Field{"bridge_lobe_fraction", &Config::bridge_lobe_fraction},
    Field{"bridge_prominence", &Config::bridge_prominence},
    Field{"tunnel_magnet_x_ratio", &Config::tunnel_magnet_x_ratio},
    Field{"tunnel_magnet_y_max_ratio", &Config::tunnel_magnet_y_max_ratio},
    Field{"cats_eye_max_yz_ratio", &Config::cats_eye_max_yz_ratio},
    Field{"cats_eye_min_x_ratio", &Config::cats_eye_min_x_ratio},
    Field{"railway_min_yz_ratio", &Config::railway_min_yz_ratio},
    Field{"bump_min_yz_ratio", &Config::bump_min_yz_ratio},
    Field{"railway_map_radius_m", &Config::railway_map_radius_m},
    Field{"turn_rate_min_rad_s", &Config::turn_rate_min_rad_s},
    Field{"heading_event_gap_s", &Config::heading_event_gap_s},
    Field{"heading_event_pad_s", &Config::heading_event_pad_s},
    Field{"turn_net_min_deg", &Config::turn_net_min_deg},
    Field{"turn_net_max_deg", &Config::turn_net_max_deg},
    Field{"curve_net_max_deg", &Config::curve_net_max_deg},
    Field{"roundabout_opposing_min_deg", &Config::roundabout_opposing_min_deg},
    Field{"roundabout_major_min_deg", &Config::roundabout_major_min_deg},
    Field{"junction_radius_m", &Config::junction_radius_m},
    Field{"slowdown_speed_mps", &Config::slowdown_speed_mps},
    Field{"approach_window_m", &Config::approach_window_m},
    Field{"approach_pass_radius_m", &Config::approach_pass_radius_m},
    Field{"potential_stop_ratio", &Config::potential_stop_ratio},
    Field{"potential_light_ratio", &Config::potential_light_ratio},
    Field{"min_traces", &Config::min_traces},
    Field{"stop_line_offset_m", &Config::stop_line_offset_m},
    Field{"eps_vehicle_m", &Config::eps_vehicle_m},
    Field{"eps_pedestrian_m", &Config::eps_pedestrian_m},
    Field{"min_pts", &Config::min_pts},
    Field{"min_support", &Config::min_support},
    Field{"match_radius_m", &Config::match_radius_m},
  };
  return kFields;
}

}  // namespace

std::vector<std::string_view> Config::keys() {
  std::vector<std::string_view> out;
  for (const auto& [name, _] : fields()) out.push_back(name);
  return out;
}

nlohmann::ordered_json Config::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, member] : fields()) j[std::string(name)] = this->*member;
  return j;
}

Config Config::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "config must be a JSON object");
  Config c;
  for (const auto& el : j.items()) {
    bool known = false;
    for (const auto& [name, member] : fields()) {
      if (name != el.key()) continue;
      if (!el.value().is_number()) throw Error(ErrorCode::kParse, "config key " + el.key() + " is not numeric");
      c.*member = el.value().get<double>();
      known = true;
      break;
    }
    if (!known) throw Error(ErrorCode::kParse, "unknown config key " + el.key());
  }
  return c;
}

Config Config::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(io::read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Config::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

}  // namespace mapsem
