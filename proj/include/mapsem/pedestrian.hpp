#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mapsem/config.hpp"
#include "mapsem/network_index.hpp"
#include "mapsem/preprocess.hpp"
#include "mapsem/segmentation.hpp"
#include "mapsem/semantics.hpp"

namespace mapsem {

enum class PedLabel { kStationary, kWalking, kEscalator, kStairsUp, kStairsDown, kUnderpassInterior };
std::string_view ped_label_name(PedLabel label);

/// Reference levels a window is compared against. Absent members mean the
/// neighbourhood held no qualifying window.
struct PedBaseline {
  std::optional<double> magnet_x_var;
  std::optional<double> magnet_y_var;
  std::optional<double> walking_accel_var;
  std::optional<double> walking_steps_per_m;
  std::optional<double> walking_peak;
};

/// Step statistics of one window.
struct WindowSteps {
  std::size_t count{0};
  double mean_peak{0.0};
};

WindowSteps steps_in_window(const WindowFeatures& w, std::span<const StepEvent> steps);

/// Rolling lower quantiles (ped_baseline_quantile) over ped_baseline_s
/// centred on each window, so that dense structures along a walk do not
/// lift the quiet-walking reference. Walking baselines use windows with at
/// least stepping_min_steps steps.
std::vector<PedBaseline> ped_baselines(std::span<const WindowFeatures> windows, std::span<const StepEvent> steps,
                                       const Config& config);

/// Decision tree for one window. Returns nullopt (abstain) when the window
/// lacks the accelerometer or magnetometer channel.
std::optional<PedLabel> classify_ped_window(const WindowFeatures& w, const WindowSteps& steps,
                                            const PedBaseline& baseline, const Config& config);

/// A pedestrian segment ready for structure detection. Sample locations are
/// expected to be smoothed.
struct PedSegmentView {
  std::string trace_id;
  std::span<const MotionFrameSample> samples;
  std::span<const StepEvent> steps;
  std::span<const WindowFeatures> windows;
  std::span<const std::optional<PedLabel>> labels;
  std::span<const PedBaseline> baselines;
};

std::vector<SemanticDetection> detect_ped_structures(const PedSegmentView& view, const NetworkIndex& index,
                                                     const Config& config);

/// Windows, baselines, labels and structures for one pedestrian segment.
std::vector<SemanticDetection> pedestrian_semantics(const std::string& trace_id,
                                                    std::span<const MotionFrameSample> samples,
                                                    std::span<const StepEvent> steps, const NetworkIndex& index,
                                                    const Config& config);

/// Number of stair steps in the climb around [t_start_ms, t_end_ms], from a
/// three-piece linear fit of along-path position against step index with
/// the walking stride fixed. Returns nullopt with fewer than 4 steps.
std::optional<int> fit_stair_steps(std::span<const MotionFrameSample> samples, std::span<const StepEvent> steps,
                                   std::int64_t t_start_ms, std::int64_t t_end_ms, double walking_m_per_step);

/// round(min(crossings) / lane_width_m), at least 1. Throws
/// Error(kOutOfRangeField) on an empty list.
int lane_count(std::span<const double> crossings_m, double lane_width_m);

/// step_count * step_rise_m. Throws Error(kOutOfRangeField) for step_count < 1.
double footbridge_height_m(int step_count, double step_rise_m);

}  // namespace mapsem
