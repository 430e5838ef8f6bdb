#include "mapsem/pedestrian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mapsem/error.hpp"
#include "mapsem/track_util.hpp"

namespace mapsem {

std::string_view ped_label_name(PedLabel label) {
  switch (label) {
    case PedLabel::kStationary: return "stationary";
    case PedLabel::kWalking: return "walking";
    case PedLabel::kEscalator: return "escalator";
    case PedLabel::kStairsUp: return "stairs-up";
    case PedLabel::kStairsDown: return "stairs-down";
    case PedLabel::kUnderpassInterior: return "underpass-interior";
  }
  return "walking";
}

WindowSteps steps_in_window(const WindowFeatures& w, std::span<const StepEvent> steps) {
  auto lo = std::lower_bound(steps.begin(), steps.end(), w.t_start_ms,
                             [](const StepEvent& e, std::int64_t t) { return e.timestamp_ms < t; });
  WindowSteps out;
  double sum = 0.0;
  for (auto it = lo; it != steps.end() && it->timestamp_ms < w.t_end_ms; ++it) {
    ++out.count;
    sum += it->peak_accel_mps2;
  }
  if (out.count > 0) out.mean_peak = sum / static_cast<double>(out.count);
  return out;
}

std::vector<PedBaseline> ped_baselines(std::span<const WindowFeatures> windows, std::span<const StepEvent> steps,
                                       const Config& config) {
  const std::size_t n = windows.size();
  std::vector<PedBaseline> out(n);
  const auto half_ms = static_cast<std::int64_t>(std::llround(config.ped_baseline_s * 500.0));
  const auto min_steps = static_cast<std::size_t>(config.stepping_min_steps);

  std::vector<WindowSteps> ws(n);
  std::vector<std::int64_t> centre(n);
  for (std::size_t i = 0; i < n; ++i) {
    ws[i] = steps_in_window(windows[i], steps);
    centre[i] = (windows[i].t_start_ms + windows[i].t_end_ms) / 2;
  }

  const double q = config.ped_baseline_quantile;
  std::vector<double> mx, my, acc, spm, peak;
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (lo < n && centre[lo] < centre[i] - half_ms) ++lo;
    while (hi < n && centre[hi] <= centre[i] + half_ms) ++hi;
    mx.clear(), my.clear(), acc.clear(), spm.clear(), peak.clear();
    for (std::size_t j = lo; j < hi; ++j) {
      const auto& w = windows[j];
      if (w.var_magnet_x) {
        mx.push_back(*w.var_magnet_x);
        my.push_back(*w.var_magnet_y);
      }
      if (ws[j].count >= min_steps && w.var_accel) {
        acc.push_back(w.var_accel->z);
        peak.push_back(ws[j].mean_peak);
        if (w.distance_m > 0.5) spm.push_back(static_cast<double>(ws[j].count) / w.distance_m);
      }
    }
    out[i].magnet_x_var = quantile(mx, q);
    out[i].magnet_y_var = quantile(my, q);
    out[i].walking_accel_var = quantile(acc, q);
    out[i].walking_steps_per_m = quantile(spm, q);
    out[i].walking_peak = quantile(peak, q);
  }
  return out;
}

namespace {

bool above(double value, const std::optional<double>& base, double ratio) {
  return base && value > 0.0 && value > ratio * *base;
}

}  // namespace

std::optional<PedLabel> classify_ped_window(const WindowFeatures& w, const WindowSteps& steps,
                                            const PedBaseline& b, const Config& c) {
  if (!w.var_accel || !w.var_magnet_x || !w.var_magnet_y) return std::nullopt;
  // Peaks far below the walker's usual impact are sensor noise, not steps.
  const bool stepping = steps.count >= static_cast<std::size_t>(c.stepping_min_steps) &&
                        (!b.walking_peak || steps.mean_peak >= c.stepping_min_peak_ratio * *b.walking_peak);
  const double magnet = *w.var_magnet_x + *w.var_magnet_y;
  std::optional<double> magnet_base;
  if (b.magnet_x_var && b.magnet_y_var) magnet_base = *b.magnet_x_var + *b.magnet_y_var;

  const bool low_accel = b.walking_accel_var ? w.var_accel->z < c.ped_accel_low_ratio * *b.walking_accel_var
                                             : !stepping;
  if (low_accel && !stepping) {
    return above(magnet, magnet_base, c.ped_magnet_high_ratio) ? PedLabel::kEscalator : PedLabel::kStationary;
  }
  if (w.rss_delta_db && *w.rss_delta_db < c.rss_drop_db &&
      above(*w.var_magnet_x, b.magnet_x_var, c.ped_magnet_high_ratio) &&
      above(*w.var_magnet_y, b.magnet_y_var, c.ped_magnet_high_ratio)) {
    return PedLabel::kUnderpassInterior;
  }
  if (stepping && b.walking_steps_per_m && w.distance_m > 0.0) {
    const double spm = static_cast<double>(steps.count) / w.distance_m;
    const bool heavy = !b.walking_peak || steps.mean_peak >= c.stairs_min_peak_ratio * *b.walking_peak;
    if (heavy && spm >= c.stairs_steps_per_m_ratio * *b.walking_steps_per_m) {
      return b.walking_peak && steps.mean_peak >= c.stairs_down_peak_ratio * *b.walking_peak ? PedLabel::kStairsDown
                                                                                             : PedLabel::kStairsUp;
    }
  }
  return PedLabel::kWalking;
}

namespace {

bool is_vertical(PedLabel l) {
  return l == PedLabel::kStairsUp || l == PedLabel::kStairsDown || l == PedLabel::kEscalator;
}

struct Run {
  PedLabel label;
  std::size_t w0, w1;  // window indices, inclusive
  std::int64_t t0, t1;
  std::size_t windows() const { return w1 - w0 + 1; }
};

std::vector<PedLabel> smooth_labels(std::span<const std::optional<PedLabel>> labels) {
  std::vector<PedLabel> out(labels.size(), PedLabel::kWalking);
  PedLabel carry = PedLabel::kWalking;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) carry = *labels[i];
    out[i] = carry;
  }
  // An isolated window between two agreeing neighbours takes their label.
  for (std::size_t i = 1; i + 1 < out.size(); ++i) {
    if (out[i] != out[i - 1] && out[i - 1] == out[i + 1]) out[i] = out[i - 1];
  }
  return out;
}

std::vector<Run> label_runs(const std::vector<PedLabel>& labels, std::span<const WindowFeatures> windows) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!runs.empty() && runs.back().label == labels[i]) {
      runs.back().w1 = i;
      runs.back().t1 = windows[i].t_end_ms;
    } else {
      runs.push_back({labels[i], i, i, windows[i].t_start_ms, windows[i].t_end_ms});
    }
  }
  return runs;
}

struct Group {
  std::vector<std::size_t> runs;
  std::int64_t t0, t1;
};

struct Crossing {
  std::int64_t t_ms;
  LatLon point;
  std::size_t edge;
  std::size_t path_index;  // index into the decimated path of the segment start
};

// Decimated path: one moving point per second.
std::vector<std::size_t> path_points(std::span<const MotionFrameSample> samples) {
  std::vector<std::size_t> idx;
  if (samples.empty()) return idx;
  std::int64_t next = samples.front().timestamp_ms;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].timestamp_ms >= next) {
      idx.push_back(i);
      next = samples[i].timestamp_ms + 1000;
    }
  }
  if (idx.back() + 1 != samples.size()) idx.push_back(samples.size() - 1);
  return idx;
}

std::vector<Crossing> road_crossings(std::span<const MotionFrameSample> samples, const std::vector<std::size_t>& path,
                                     const NetworkIndex& index) {
  std::vector<Crossing> out;
  const auto& net = index.network();
  for (std::size_t k = 0; k + 1 < path.size(); ++k) {
    const auto& a = samples[path[k]];
    const auto& b = samples[path[k + 1]];
    const LocalFrame frame(a.location);
    const auto pb = frame.to_local(b.location);
    const double len = std::hypot(pb.east_m, pb.north_m);
    if (len <= 0.0) continue;
    const LatLon mid{(a.location.lat_deg + b.location.lat_deg) / 2, (a.location.lon_deg + b.location.lon_deg) / 2};
    for (std::size_t e : index.edges_near(mid, len / 2 + 1.0)) {
      if (net.edges()[e].kind != EdgeKind::kRoad) continue;
      const auto q0 = frame.to_local(net.node(net.edges()[e].from));
      const auto q1 = frame.to_local(net.node(net.edges()[e].to));
      const auto hit = segment_intersection({0, 0}, pb, q0, q1);
      if (!hit || hit->first >= 1.0) continue;
      const double u = hit->first;
      const auto t = a.timestamp_ms + static_cast<std::int64_t>(std::llround(u * (b.timestamp_ms - a.timestamp_ms)));
      out.push_back({t, frame.to_geo({u * pb.east_m, u * pb.north_m}), e, k});
    }
  }
  std::sort(out.begin(), out.end(), [](const Crossing& x, const Crossing& y) { return x.t_ms < y.t_ms; });
  // Hits on split edges at a shared node count once.
  std::vector<Crossing> unique;
  for (const auto& c : out) {
    if (!unique.empty() && c.t_ms - unique.back().t_ms < 3000 && haversine_m(c.point, unique.back().point) < 5.0) {
      continue;
    }
    unique.push_back(c);
  }
  return unique;
}

// Acute angle between the path direction and the edge, radians in [0, pi/2].
double crossing_angle(std::span<const MotionFrameSample> samples, const Crossing& c, const RoadNetwork& net) {
  const LatLon before = location_at(samples, c.t_ms - 4000);
  const LatLon after = location_at(samples, c.t_ms + 4000);
  const auto& e = net.edges()[c.edge];
  const double path = bearing_rad(before, after);
  const double edge = bearing_rad(net.node(e.from), net.node(e.to));
  const double d = std::abs(wrap_angle(path - edge));
  return std::min(d, std::numbers::pi - d);
}

// Extent along the crossing direction of the straight stretch around it.
double straight_extent(std::span<const MotionFrameSample> samples, const std::vector<std::size_t>& path,
                       const Crossing& c, double stop_speed_mps) {
  const LatLon before = location_at(samples, c.t_ms - 4000);
  const LatLon after = location_at(samples, c.t_ms + 4000);
  const LocalFrame frame(c.point);
  const auto d0 = frame.to_local(after);
  const auto db = frame.to_local(before);
  double dx = d0.east_m - db.east_m, dy = d0.north_m - db.north_m;
  const double dn = std::hypot(dx, dy);
  if (dn <= 0.0) return 0.0;
  dx /= dn, dy /= dn;
  const double cos_limit = std::cos(std::numbers::pi / 4);
  auto along = [&](std::size_t k) {
    const auto p = frame.to_local(samples[path[k]].location);
    return p.east_m * dx + p.north_m * dy;
  };
  auto step_ok = [&](std::size_t k0, std::size_t k1, bool& moving) {
    const auto p0 = frame.to_local(samples[path[k0]].location);
    const auto p1 = frame.to_local(samples[path[k1]].location);
    const double sx = p1.east_m - p0.east_m, sy = p1.north_m - p0.north_m;
    const double len = std::hypot(sx, sy);
    const double dt = 1e-3 * static_cast<double>(samples[path[k1]].timestamp_ms - samples[path[k0]].timestamp_ms);
    moving = dt > 0.0 && len / dt >= stop_speed_mps;
    return !moving || (sx * dx + sy * dy) / len >= cos_limit;
  };
  double lo = 0.0, hi = 0.0;
  bool moving = false;
  for (std::size_t k = c.path_index; k > 0; --k) {
    if (!step_ok(k - 1, k, moving) || along(k - 1) < -60.0) break;
    if (moving) lo = std::min(lo, along(k - 1));
  }
  for (std::size_t k = c.path_index + 1; k < path.size(); ++k) {
    if (!step_ok(k - 1, k, moving) || along(k) > 60.0) break;
    if (moving) hi = std::max(hi, along(k));
  }
  return hi - lo;
}

double span_weight(std::span<const MotionFrameSample> samples, std::int64_t t0, std::int64_t t1) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (s.timestamp_ms < t0) continue;
    if (s.timestamp_ms > t1) break;
    sum += s.loc_accuracy_m;
    ++n;
  }
  return accuracy_weight(n > 0 ? sum / static_cast<double>(n) : 0.0);
}

}  // namespace

std::optional<int> fit_stair_steps(std::span<const MotionFrameSample> samples, std::span<const StepEvent> steps,
                                   std::int64_t t_start_ms, std::int64_t t_end_ms, double walking_m_per_step) {
  std::vector<LatLon> pos;
  for (const auto& e : steps) {
    if (e.timestamp_ms >= t_start_ms && e.timestamp_ms <= t_end_ms) pos.push_back(location_at(samples, e.timestamp_ms));
  }
  const std::size_t n = pos.size();
  if (n < 4) return std::nullopt;
  const LocalFrame frame(pos.front());
  const auto end = frame.to_local(pos.back());
  const double len = std::hypot(end.east_m, end.north_m);
  if (len <= 0.0) return std::nullopt;
  std::vector<double> s(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = frame.to_local(pos[k]);
    s[k] = (p.east_m * end.east_m + p.north_m * end.north_m) / len;
  }

  // Displacements between consecutive steps are either one stride or one
  // tread; the treads occupy steps k1+1 .. k2.
  double best = std::numeric_limits<double>::infinity();
  int best_count = 0;
  for (std::size_t k1 = 0; k1 + 1 < n; ++k1) {
    for (std::size_t k2 = k1 + 1; k2 < n; ++k2) {
      double sg = 0, sgg = 0, sy = 0, sgy = 0;
      std::vector<double> y(n), g(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double walked = static_cast<double>(std::min(k, k1) + (k > k2 ? k - k2 : 0));
        g[k] = static_cast<double>(std::clamp(k, k1, k2) - k1);
        y[k] = s[k] - walking_m_per_step * walked;
        sg += g[k];
        sgg += g[k] * g[k];
        sy += y[k];
        sgy += g[k] * y[k];
      }
      const double m = static_cast<double>(n);
      const double det = m * sgg - sg * sg;
      if (det <= 0.0) continue;
      const double r = (m * sgy - sg * sy) / det;
      const double c = (sy - r * sg) / m;
      double sse = 0.0;
      for (std::size_t k = 0; k < n; ++k) sse += (y[k] - c - r * g[k]) * (y[k] - c - r * g[k]);
      if (sse < best) {
        best = sse;
        best_count = static_cast<int>(k2 - k1);
      }
    }
  }
  return best_count;
}

std::vector<SemanticDetection> detect_ped_structures(const PedSegmentView& view, const NetworkIndex& index,
                                                     const Config& config) {
  std::vector<SemanticDetection> out;
  const auto& samples = view.samples;
  if (view.windows.empty() || samples.empty()) return out;
  const auto labels = smooth_labels(view.labels);
  const auto runs = label_runs(labels, view.windows);
  const auto gap_ms = static_cast<std::int64_t>(std::llround(config.structure_max_gap_s * 1000.0));

  auto make = [&](SemanticKind kind, std::int64_t t0, std::int64_t t1, LatLon where) {
    SemanticDetection d;
    d.kind = kind;
    d.trace_id = view.trace_id;
    d.t_start_ms = t0;
    d.t_end_ms = t1;
    d.location = where;
    d.weight = span_weight(samples, t0, t1);
    return d;
  };
  auto midpoint = [&](std::int64_t t0, std::int64_t t1) { return location_at(samples, (t0 + t1) / 2); };

  // Vertical-movement groups and underpass interiors.
  std::vector<Group> groups;
  std::vector<std::size_t> underpass_runs;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs[r].windows() < 2) continue;
    if (runs[r].label == PedLabel::kUnderpassInterior) underpass_runs.push_back(r);
    if (!is_vertical(runs[r].label)) continue;
    if (!groups.empty() && runs[r].t0 - groups.back().t1 <= gap_ms) {
      groups.back().runs.push_back(r);
      groups.back().t1 = runs[r].t1;
    } else {
      groups.push_back({{r}, runs[r].t0, runs[r].t1});
    }
  }

  std::vector<std::pair<std::int64_t, std::int64_t>> structure_spans;
  std::vector<bool> consumed(groups.size(), false);
  for (std::size_t u : underpass_runs) {
    std::int64_t t0 = runs[u].t0, t1 = runs[u].t1;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].t1 >= runs[u].t0 - gap_ms && groups[g].t0 <= runs[u].t1 + gap_ms) {
        consumed[g] = true;
        t0 = std::min(t0, groups[g].t0);
        t1 = std::max(t1, groups[g].t1);
      }
    }
    structure_spans.push_back({t0, t1});
    out.push_back(make(SemanticKind::kUnderpass, runs[u].t0, runs[u].t1, midpoint(runs[u].t0, runs[u].t1)));
  }

  const auto path = path_points(samples);
  const auto crossings = road_crossings(samples, path, index);
  std::vector<double> cum(samples.size(), 0.0);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    cum[i] = cum[i - 1] + haversine_m(samples[i - 1].location, samples[i].location);
  }
  auto sample_at = [&](std::int64_t t) {
    return static_cast<std::size_t>(
        std::lower_bound(samples.begin(), samples.end(), t,
                         [](const MotionFrameSample& s, std::int64_t v) { return s.timestamp_ms < v; }) -
        samples.begin());
  };
  auto min_rss = [&](std::int64_t t0, std::int64_t t1) {
    double m = 0.0;
    for (const auto& w : view.windows) {
      if (w.t_end_ms > t0 && w.t_start_ms < t1 && w.rss_delta_db) m = std::min(m, *w.rss_delta_db);
    }
    return m;
  };

  for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
    if (consumed[g] || consumed[g + 1]) continue;
    const auto& a = groups[g];
    const auto& b = groups[g + 1];
    const std::size_t i0 = sample_at(a.t1), i1 = std::min(sample_at(b.t0), samples.size() - 1);
    if (i1 <= i0 || cum[i1] - cum[i0] > config.footbridge_max_deck_m) continue;
    const auto hit = std::find_if(crossings.begin(), crossings.end(),
                                  [&](const Crossing& c) { return c.t_ms >= a.t0 && c.t_ms <= b.t1; });
    if (hit == crossings.end()) continue;
    if (min_rss(a.t0, b.t1) < config.rss_drop_db) continue;
    auto d = make(SemanticKind::kFootbridge, a.t0, b.t1, hit->point);
    d.span_length_m = cum[i1] - cum[i0];
    const auto stair_run = std::find_if(a.runs.begin(), a.runs.end(), [&](std::size_t r) {
      return runs[r].label == PedLabel::kStairsUp || runs[r].label == PedLabel::kStairsDown;
    });
    const std::size_t base = view.baselines.empty() ? 0 : std::min(runs[a.runs.front()].w0, view.baselines.size() - 1);
    if (stair_run != a.runs.end() && !view.baselines.empty() && view.baselines[base].walking_steps_per_m) {
      const auto margin = static_cast<std::int64_t>(4000);
      d.step_count = fit_stair_steps(samples, view.steps, runs[*stair_run].t0 - margin, runs[*stair_run].t1 + margin,
                                     1.0 / *view.baselines[base].walking_steps_per_m);
      if (d.step_count && *d.step_count < 1) d.step_count.reset();
    }
    out.push_back(d);
    consumed[g] = consumed[g + 1] = true;
    structure_spans.push_back({a.t0, b.t1});
  }

  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (consumed[g]) continue;
    for (std::size_t r : groups[g].runs) {
      const auto kind = runs[r].label == PedLabel::kEscalator ? SemanticKind::kEscalator : SemanticKind::kStairs;
      out.push_back(make(kind, runs[r].t0, runs[r].t1, midpoint(runs[r].t0, runs[r].t1)));
    }
  }

  const double min_angle = std::numbers::pi / 2 - config.crosswalk_max_angle_deg * kDegToRad;
  for (const auto& c : crossings) {
    const bool inside = std::any_of(structure_spans.begin(), structure_spans.end(), [&](const auto& s) {
      return c.t_ms >= s.first - gap_ms && c.t_ms <= s.second + gap_ms;
    });
    if (inside || crossing_angle(samples, c, index.network()) < min_angle) continue;
    auto d = make(SemanticKind::kCrosswalk, c.t_ms - 2000, c.t_ms + 2000, c.point);
    d.crossing_length_m = straight_extent(samples, path, c, config.stop_speed_mps);
    out.push_back(d);
  }

  std::sort(out.begin(), out.end(), [](const SemanticDetection& x, const SemanticDetection& y) {
    return std::tie(x.t_start_ms, x.kind) < std::tie(y.t_start_ms, y.kind);
  });
  return out;
}

std::vector<SemanticDetection> pedestrian_semantics(const std::string& trace_id,
                                                    std::span<const MotionFrameSample> samples,
                                                    std::span<const StepEvent> steps, const NetworkIndex& index,
                                                    const Config& config) {
  const auto windows = window_features(samples, config.window_s, config.window_overlap, config.rss_baseline_s,
                                       static_cast<std::size_t>(config.min_window_samples));
  const auto baselines = ped_baselines(windows, steps, config);
  std::vector<std::optional<PedLabel>> labels(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    labels[i] = classify_ped_window(windows[i], steps_in_window(windows[i], steps), baselines[i], config);
  }
  return detect_ped_structures({trace_id, samples, steps, windows, labels, baselines}, index, config);
}

int lane_count(std::span<const double> crossings_m, double lane_width_m) {
  if (crossings_m.empty()) throw Error(ErrorCode::kOutOfRangeField, "lane_count needs at least one crossing");
  const double shortest = *std::min_element(crossings_m.begin(), crossings_m.end());
  return std::max(1, static_cast<int>(std::lround(shortest / lane_width_m)));
}

double footbridge_height_m(int step_count, double step_rise_m) {
  if (step_count < 1) throw Error(ErrorCode::kOutOfRangeField, "step_count must be at least 1");
  return step_count * step_rise_m;
}

}  // namespace mapsem
