#include "mapsem/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>
#include <tuple>

#include "mapsem/error.hpp"
#include "mapsem/pedestrian.hpp"
#include "mapsem/preprocess.hpp"
#include "mapsem/segmentation.hpp"
#include "mapsem/vehicle.hpp"

namespace mapsem {

namespace {

/// Track heading and speed at a sample time, interpolated between the 1 Hz
/// points (headings along the shorter arc).
struct Motion {
  double heading{0.0};
  double speed{0.0};
  LatLon location{};
};

Motion motion_at(std::span<const TrackPoint> track, std::int64_t t) {
  auto it = std::lower_bound(track.begin(), track.end(), t,
                             [](const TrackPoint& p, std::int64_t v) { return p.timestamp_ms < v; });
  if (it == track.begin()) return {track.front().heading_rad, track.front().speed_mps, track.front().location};
  if (it == track.end()) return {track.back().heading_rad, track.back().speed_mps, track.back().location};
  const auto& b = *it;
  const auto& a = *(it - 1);
  const double u = static_cast<double>(t - a.timestamp_ms) / static_cast<double>(b.timestamp_ms - a.timestamp_ms);
  return {wrap_angle(a.heading_rad + u * wrap_angle(b.heading_rad - a.heading_rad)),
          a.speed_mps + u * (b.speed_mps - a.speed_mps),
          {a.location.lat_deg + u * (b.location.lat_deg - a.location.lat_deg),
           a.location.lon_deg + u * (b.location.lon_deg - a.location.lon_deg)}};
}

SemanticDetection heading_detection(const HeadingEvent& ev, std::span<const MotionFrameSample> ms,
                                    const std::string& trace_id, SemanticKind kind) {
  SemanticDetection d;
  d.kind = kind;
  d.trace_id = trace_id;
  d.t_start_ms = ms[ev.first].timestamp_ms;
  d.t_end_ms = ms[ev.last].timestamp_ms;
  d.location = ev.location;
  double acc = 0.0;
  for (std::size_t i = ev.first; i <= ev.last; ++i) acc += ms[i].loc_accuracy_m;
  d.weight = accuracy_weight(acc / static_cast<double>(ev.last - ev.first + 1));
  return d;
}

void classify_segment(const Trace& piece, const Segment& seg, const NetworkIndex& index, const Config& config,
                      TraceResult& out) {
  const std::span<const SensorSample> samples(piece.samples.data() + seg.begin, seg.end - seg.begin);
  const auto track = track_kinematics(samples, config);
  if (track.size() < 3) return;

  std::vector<double> motion_heading(samples.size()), weights(samples.size());
  std::vector<LatLon> smoothed(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Motion m = motion_at(track, samples[i].timestamp_ms);
    motion_heading[i] = m.heading;
    weights[i] = m.speed > config.stop_speed_mps ? 1.0 : 0.0;
    smoothed[i] = m.location;
  }
  const auto mount = estimate_mount(samples, motion_heading, weights);
  if (!mount) return;  // no usable gravity/magnet: abstain on the whole segment

  // Device heading carries the fine turning detail; its constant offset from
  // the direction of travel is the mounting yaw.
  std::vector<double> heading = motion_heading;
  if (const auto device = heading_series(samples)) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      const double d = motion_heading[i] - (*device)[i];
      sx += std::sin(d);
      sy += std::cos(d);
    }
    if (sx != 0.0 || sy != 0.0) {
      const double offset = std::atan2(sx, sy);
      for (std::size_t i = 0; i < samples.size(); ++i) heading[i] = wrap_angle((*device)[i] + offset);
    }
  }

  std::vector<MotionFrameSample> ms;
  ms.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    MotionFrameSample m = to_world_frame(samples[i], *mount, heading[i]);
    m.location = smoothed[i];
    ms.push_back(std::move(m));
  }

  if (seg.mode == Mode::kVehicle) {
    const NetworkIndex* idx = index.network().empty() ? nullptr : &index;
    // Turn geometry (a roundabout's ring in particular) is fitted on the
    // unsnapped track; a graph edge through a junction has no curve to snap to.
    const auto events = heading_events(ms, config, idx);
    if (idx) {
      const auto snapped = snap_to_network(smoothed, index, config.snap_radius_m);
      for (std::size_t i = 0; i < ms.size(); ++i) ms[i].location = snapped[i];
    }
    auto dets = vehicle_event_semantics(piece.trace_id, ms, config, idx);
    out.detections.insert(out.detections.end(), dets.begin(), dets.end());
    for (const auto& ev : events) {
      switch (ev.cls) {
        case HeadingClass::kRoundabout:
          out.detections.push_back(heading_detection(ev, ms, piece.trace_id, SemanticKind::kRoundabout));
          break;
        case HeadingClass::kIntersectionTurn:
          out.detections.push_back(heading_detection(ev, ms, piece.trace_id, SemanticKind::kIntersectionTurn));
          break;
        case HeadingClass::kTurn:
          out.turn_candidates.push_back(heading_detection(ev, ms, piece.trace_id, SemanticKind::kIntersectionTurn));
          break;
        default: break;
      }
    }
    if (idx) {
      auto obs = approach_observations(piece.trace_id, track, index, config);
      out.observations.insert(out.observations.end(), obs.begin(), obs.end());
    }
  } else if (seg.mode == Mode::kPedestrian) {
    const auto steps = detect_steps(samples, config);
    auto dets = pedestrian_semantics(piece.trace_id, ms, steps, index, config);
    out.detections.insert(out.detections.end(), dets.begin(), dets.end());
  }
}

bool detection_less(const SemanticDetection& a, const SemanticDetection& b) {
  return std::tie(a.trace_id, a.t_start_ms, a.t_end_ms, a.kind, a.location.lat_deg, a.location.lon_deg) <
         std::tie(b.trace_id, b.t_start_ms, b.t_end_ms, b.kind, b.location.lat_deg, b.location.lon_deg);
}

}  // namespace

TraceResult classify_trace(const Trace& trace, const NetworkIndex& index, const Config& config) {
  TraceResult out;
  out.trace_id = trace.trace_id;
  const Trace valid = require_valid(trace);
  for (const auto& piece : filter_indoor(valid, config)) {
    if (piece.samples.size() < 2) continue;
    std::vector<Segment> segments;
    try {
      segments = segment_and_classify_mode(piece, config);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kTooShort || e.code() == ErrorCode::kEmptySeries) continue;
      throw;
    }
    for (const auto& seg : segments) {
      if (seg.mode == Mode::kOther || seg.end - seg.begin < 2) continue;
      classify_segment(piece, seg, index, config, out);
    }
  }
  std::sort(out.detections.begin(), out.detections.end(), detection_less);
  return out;
}

FeatureSet build_features(const std::vector<SemanticDetection>& detections, std::vector<std::string> trace_ids,
                          const Config& config) {
  FeatureSet set;
  set.config_hash = config.hash();
  std::sort(trace_ids.begin(), trace_ids.end());
  trace_ids.erase(std::unique(trace_ids.begin(), trace_ids.end()), trace_ids.end());
  set.trace_ids = std::move(trace_ids);
  for (const auto& c : cluster_detections(detections, config)) {
    if (c.emitted) set.features.push_back(to_map_feature(c, config));
  }
  std::sort(set.features.begin(), set.features.end(), [](const MapFeature& a, const MapFeature& b) {
    return std::tie(a.kind, a.location.lat_deg, a.location.lon_deg) <
           std::tie(b.kind, b.location.lat_deg, b.location.lon_deg);
  });
  return set;
}

PipelineOutput run_pipeline(const std::vector<Trace>& traces, const RoadNetwork& network, const Config& config) {
  const NetworkIndex index(network);
  std::vector<TraceResult> results(traces.size());
  std::vector<std::exception_ptr> errors(traces.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < traces.size(); i = next++) {
      try {
        results[i] = classify_trace(traces[i], index, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(threads, traces.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "trace '" + traces[i].trace_id + "': " + e.what());
    }
  }

  PipelineOutput out;
  ApproachAccumulator acc;
  std::vector<SemanticDetection> turns;
  std::vector<std::string> ids;
  for (const auto& r : results) {
    ids.push_back(r.trace_id);
    out.detections.insert(out.detections.end(), r.detections.begin(), r.detections.end());
    turns.insert(turns.end(), r.turn_candidates.begin(), r.turn_candidates.end());
    for (const auto& o : r.observations) acc.add(o);
  }

  // A turn away from any mapped junction still marks one when another trace
  // turned at the same place.
  const double eps = eps_for(SemanticKind::kIntersectionTurn, config);
  for (const auto& t : turns) {
    const bool repeated = std::any_of(turns.begin(), turns.end(), [&](const SemanticDetection& o) {
      return o.trace_id != t.trace_id && haversine_m(o.location, t.location) <= eps;
    });
    if (repeated) out.detections.push_back(t);
  }
  const auto regs = acc.regulator_features(config);
  out.detections.insert(out.detections.end(), regs.begin(), regs.end());
  std::sort(out.detections.begin(), out.detections.end(), detection_less);

  out.features = build_features(out.detections, ids, config);
  return out;
}

}  // namespace mapsem
