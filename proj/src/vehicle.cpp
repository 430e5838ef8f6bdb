#include "mapsem/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mapsem/track_util.hpp"

namespace mapsem {

std::vector<VehBaseline> veh_baselines(std::span<const WindowFeatures> windows, const Config& config) {
  const std::size_t n = windows.size();
  std::vector<VehBaseline> out(n);
  const auto half_ms = static_cast<std::int64_t>(std::llround(config.veh_baseline_s * 500.0));
  std::vector<double> gy, gz, ax, mx, my, mean;
  std::size_t lo = 0, hi = 0;
  auto centre = [&](std::size_t i) { return (windows[i].t_start_ms + windows[i].t_end_ms) / 2; };
  for (std::size_t i = 0; i < n; ++i) {
    while (lo < n && centre(lo) < centre(i) - half_ms) ++lo;
    while (hi < n && centre(hi) <= centre(i) + half_ms) ++hi;
    gy.clear(), gz.clear(), ax.clear(), mx.clear(), my.clear(), mean.clear();
    for (std::size_t j = lo; j < hi; ++j) {
      const auto& w = windows[j];
      if (w.var_gravity_y) {
        gy.push_back(*w.var_gravity_y);
        gz.push_back(*w.var_gravity_z);
        mean.push_back(*w.mean_gravity_y);
      }
      if (w.var_accel) ax.push_back(w.var_accel->x);
      if (w.var_magnet_x) {
        mx.push_back(*w.var_magnet_x);
        my.push_back(*w.var_magnet_y);
      }
    }
    out[i] = {median(gy).value_or(0.0), median(gz).value_or(0.0), median(ax).value_or(0.0),
              median(mx).value_or(0.0),  median(my).value_or(0.0), median(mean).value_or(0.0)};
  }
  return out;
}

namespace {

bool ratio_high(const std::optional<double>& value, double base, double ratio) {
  return value && *value > 0.0 && *value >= ratio * base;
}

double mean_square(const std::vector<double>& v, const Extent& e) {
  double acc = 0.0;
  for (std::size_t i = e.first; i <= e.last; ++i) acc += v[i] * v[i];
  return acc / static_cast<double>(e.last - e.first + 1);
}

std::vector<double> moving_average(std::span<const MotionFrameSample> s, const std::vector<double>& v, double width_s) {
  const std::size_t n = v.size();
  std::vector<double> out(n);
  const auto half = static_cast<std::int64_t>(std::llround(width_s * 500.0));
  std::size_t lo = 0, hi = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    while (hi < n && s[hi].timestamp_ms <= s[i].timestamp_ms + half) sum += v[hi++];
    while (s[lo].timestamp_ms < s[i].timestamp_ms - half) sum -= v[lo++];
    out[i] = sum / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace

bool window_anomalous(const WindowFeatures& w, const VehBaseline& b, const Config& c) {
  if (ratio_high(w.var_gravity_y, b.var_gravity_y, c.anomaly_ratio)) return true;
  if (ratio_high(w.var_gravity_z, b.var_gravity_z, c.anomaly_ratio)) return true;
  if (w.var_accel && ratio_high(w.var_accel->x, b.var_accel_x, c.anomaly_ratio)) return true;
  if (ratio_high(w.var_magnet_x, b.var_magnet_x, c.anomaly_ratio)) return true;
  if (w.rss_delta_db && *w.rss_delta_db < c.rss_drop_db) return true;
  const double sd = std::sqrt(b.var_gravity_y);
  return w.mean_gravity_y && sd > 0.0 && std::abs(*w.mean_gravity_y - b.mean_gravity_y) > c.bridge_mean_k * sd;
}

VehSignals veh_signals(std::span<const MotionFrameSample> samples, std::span<const WindowFeatures> windows,
                       std::span<const VehBaseline> baselines, const Config& config) {
  VehSignals s;
  s.samples = samples;
  s.windows = windows;
  s.baselines = baselines;
  const std::size_t n = samples.size();
  s.cum_m.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) s.cum_m[i] = s.cum_m[i - 1] + haversine_m(samples[i - 1].location, samples[i].location);

  std::vector<double> gy(n), gz(n), ax(n);
  for (std::size_t i = 0; i < n; ++i) {
    gy[i] = samples[i].gravity_y.value_or(0.0);
    gz[i] = samples[i].gravity_z.value_or(0.0);
    ax[i] = samples[i].accel_world ? samples[i].accel_world->x : 0.0;
  }
  s.trend_gy = moving_average(samples, gy, config.vibration_detrend_s);
  const auto trend_gz = moving_average(samples, gz, config.vibration_detrend_s);
  const auto trend_ax = moving_average(samples, ax, config.vibration_detrend_s);
  s.vib_gy.resize(n), s.vib_gz.resize(n), s.vib_ax.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.vib_gy[i] = gy[i] - s.trend_gy[i];
    s.vib_gz[i] = gz[i] - trend_gz[i];
    s.vib_ax[i] = ax[i] - trend_ax[i];
  }

  s.window_of.assign(n, 0);
  std::size_t w = 0;
  for (std::size_t i = 0; i < n && !windows.empty(); ++i) {
    const auto t = samples[i].timestamp_ms;
    while (w + 1 < windows.size() &&
           std::abs(windows[w + 1].t_start_ms + windows[w + 1].t_end_ms - 2 * t) <=
               std::abs(windows[w].t_start_ms + windows[w].t_end_ms - 2 * t)) {
      ++w;
    }
    s.window_of[i] = w;
  }
  return s;
}

namespace {

template <typename Exceeds>
std::optional<Extent> grow_extent(const VehSignals& s, std::size_t i0, std::size_t i1, double gap_m, Exceeds exceeds) {
  std::optional<Extent> e;
  for (std::size_t i = i0; i < i1; ++i) {
    if (!exceeds(i)) continue;
    if (!e) e = Extent{i, i};
    e->last = i;
  }
  if (!e) return e;
  for (std::size_t j = e->last + 1; j < s.samples.size() && s.cum_m[j] - s.cum_m[e->last] <= gap_m; ++j) {
    if (exceeds(j)) e->last = j;
  }
  for (std::size_t j = e->first; j > 0 && s.cum_m[e->first] - s.cum_m[j - 1] <= gap_m; --j) {
    if (exceeds(j - 1)) e->first = j - 1;
  }
  return e;
}

std::optional<Extent> join(const std::optional<Extent>& a, const std::optional<Extent>& b) {
  if (!a) return b;
  if (!b) return a;
  return Extent{std::min(a->first, b->first), std::max(a->last, b->last)};
}

std::size_t sample_at(std::span<const MotionFrameSample> samples, std::int64_t t) {
  return static_cast<std::size_t>(
      std::lower_bound(samples.begin(), samples.end(), t,
                       [](const MotionFrameSample& x, std::int64_t v) { return x.timestamp_ms < v; }) -
      samples.begin());
}

}  // namespace

std::vector<VehEventRun> anomaly_runs(const VehSignals& s, const Config& config) {
  std::vector<VehEventRun> runs;
  const auto& windows = s.windows;
  if (s.samples.empty()) return runs;
  auto sd = [&](std::size_t i, double VehBaseline::*field) { return std::sqrt(s.baselines[s.window_of[i]].*field); };
  auto vib = [&](std::size_t i) {
    const double k = config.extent_k;
    const double sy = sd(i, &VehBaseline::var_gravity_y);
    const double sz = sd(i, &VehBaseline::var_gravity_z);
    const double sx = sd(i, &VehBaseline::var_accel_x);
    return (sy > 0 && std::abs(s.vib_gy[i]) > k * sy) || (sz > 0 && std::abs(s.vib_gz[i]) > k * sz) ||
           (sx > 0 && std::abs(s.vib_ax[i]) > k * sx);
  };
  auto trend = [&](std::size_t i) {
    const double sy = sd(i, &VehBaseline::var_gravity_y);
    return sy > 0 && std::abs(s.trend_gy[i] - s.baselines[s.window_of[i]].mean_gravity_y) > config.bridge_mean_k * sy;
  };

  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (!window_anomalous(windows[i], s.baselines[i], config)) continue;
    if (!runs.empty() && runs.back().w1 + 1 == i) {
      runs.back().w1 = i;
      runs.back().t1 = windows[i].t_end_ms;
    } else {
      runs.push_back({i, i, windows[i].t_start_ms, windows[i].t_end_ms, std::nullopt, std::nullopt});
    }
  }
  for (auto& r : runs) {
    const std::size_t i0 = sample_at(s.samples, r.t0), i1 = sample_at(s.samples, r.t1);
    r.vibration = grow_extent(s, i0, i1, config.run_merge_gap_m, vib);
    r.trend = grow_extent(s, i0, i1, config.run_merge_gap_m, trend);
  }

  auto footprint = [&](const VehEventRun& r) {
    if (auto e = join(r.vibration, r.trend)) return *e;
    return Extent{sample_at(s.samples, r.t0), std::min(sample_at(s.samples, r.t1), s.samples.size() - 1)};
  };
  std::vector<VehEventRun> merged;
  for (auto& r : runs) {
    if (!merged.empty()) {
      const Extent a = footprint(merged.back());
      const Extent b = footprint(r);
      if (b.first <= a.last || s.cum_m[b.first] - s.cum_m[a.last] <= config.run_merge_gap_m) {
        auto& m = merged.back();
        m.w1 = r.w1;
        m.t1 = std::max(m.t1, r.t1);
        m.vibration = join(m.vibration, r.vibration);
        m.trend = join(m.trend, r.trend);
        continue;
      }
    }
    merged.push_back(r);
  }
  return merged;
}

namespace {

double mean_accuracy_weight(std::span<const MotionFrameSample> s, std::size_t i0, std::size_t i1) {
  double sum = 0.0;
  for (std::size_t i = i0; i <= i1; ++i) sum += s[i].loc_accuracy_m;
  return accuracy_weight(sum / static_cast<double>(i1 - i0 + 1));
}

std::size_t midpoint_sample(const VehSignals& s, const Extent& e) {
  const double mid = 0.5 * (s.cum_m[e.first] + s.cum_m[e.last]);
  std::size_t i = e.first;
  while (i < e.last && s.cum_m[i] < mid) ++i;
  return i;
}

// Positive lobe then negative lobe of the de-meaned along-track gravity.
bool up_then_down(const VehSignals& s, const Extent& e, const Config& c) {
  const std::size_t n = e.last - e.first + 1;
  std::vector<double> d(n);
  double sd = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = e.first + k;
    const auto& b = s.baselines[s.window_of[i]];
    d[k] = s.trend_gy[i] - b.mean_gravity_y;
    sd += std::sqrt(b.var_gravity_y);
  }
  sd /= static_cast<double>(n);
  // Best single sign change: agreement of positive before and negative after.
  std::vector<std::size_t> pos_prefix(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) pos_prefix[k + 1] = pos_prefix[k] + (d[k] > 0 ? 1 : 0);
  std::size_t best_split = 0, best_agree = 0;
  for (std::size_t z = 0; z <= n; ++z) {
    const std::size_t agree = pos_prefix[z] + ((n - z) - (pos_prefix[n] - pos_prefix[z]));
    if (agree > best_agree) {
      best_agree = agree;
      best_split = z;
    }
  }
  if (best_split == 0 || best_split == n) return false;
  if (static_cast<double>(best_agree) < 0.8 * static_cast<double>(n)) return false;
  const double span = s.cum_m[e.last] - s.cum_m[e.first];
  const std::size_t zi = e.first + best_split;
  if (s.cum_m[zi] - s.cum_m[e.first] < c.bridge_lobe_fraction * span) return false;
  if (s.cum_m[e.last] - s.cum_m[zi] < c.bridge_lobe_fraction * span) return false;
  const double up = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(best_split));
  const double down = *std::min_element(d.begin() + static_cast<std::ptrdiff_t>(best_split), d.end());
  return up >= c.bridge_prominence * sd && -down >= c.bridge_prominence * sd;
}

bool crosses_railway(const VehSignals& s, const Extent& e, const NetworkIndex& index, double radius_m) {
  const LatLon mid = s.samples[midpoint_sample(s, e)].location;
  const auto& net = index.network();
  for (std::size_t edge : index.edges_near(mid, radius_m)) {
    if (net.edges()[edge].kind != EdgeKind::kRailway) continue;
    if (index.project(mid, edge).distance_m <= radius_m) return true;
  }
  return false;
}

}  // namespace

std::optional<SemanticDetection> classify_veh_event(const VehEventRun& run, const VehSignals& s,
                                                    const std::string& trace_id, const Config& c,
                                                    const NetworkIndex* index) {
  for (std::size_t w = run.w0; w <= run.w1; ++w) {
    const auto& win = s.windows[w];
    if (!win.var_gravity_y || !win.var_magnet_x || !win.var_accel) return std::nullopt;
  }
  SemanticDetection d;
  d.trace_id = trace_id;
  d.t_start_ms = run.t0;
  d.t_end_ms = run.t1;

  // (1) tunnel
  std::optional<double> min_rss;
  double mx_ratio = 0.0, my_ratio = 0.0;
  for (std::size_t w = run.w0; w <= run.w1; ++w) {
    const auto& win = s.windows[w];
    const auto& b = s.baselines[w];
    if (win.rss_delta_db) min_rss = std::min(min_rss.value_or(0.0), *win.rss_delta_db);
    mx_ratio += b.var_magnet_x > 0 ? *win.var_magnet_x / b.var_magnet_x : 0.0;
    my_ratio += b.var_magnet_y > 0 ? *win.var_magnet_y / b.var_magnet_y : 0.0;
  }
  const double nw = static_cast<double>(run.w1 - run.w0 + 1);
  mx_ratio /= nw;
  my_ratio /= nw;
  if (min_rss && *min_rss < c.rss_drop_db && mx_ratio >= c.tunnel_magnet_x_ratio &&
      my_ratio < c.tunnel_magnet_y_max_ratio) {
    const std::size_t i0 = sample_at(s.samples, run.t0);
    const std::size_t i1 = std::min(sample_at(s.samples, run.t1), s.samples.size() - 1);
    d.kind = SemanticKind::kTunnel;
    d.location = s.samples[midpoint_sample(s, {i0, i1})].location;
    d.span_length_m = s.cum_m[i1] - s.cum_m[i0];
    d.weight = mean_accuracy_weight(s.samples, i0, i1);
    return d;
  }

  // (2) bridge
  if (run.trend) {
    const Extent e = *run.trend;
    const double span = s.cum_m[e.last] - s.cum_m[e.first];
    if (span >= c.bridge_min_m && up_then_down(s, e, c)) {
      d.kind = SemanticKind::kBridge;
      d.location = s.samples[e.last].location;
      d.start_location = s.samples[e.first].location;
      d.span_length_m = span;
      d.t_start_ms = s.samples[e.first].timestamp_ms;
      d.t_end_ms = s.samples[e.last].timestamp_ms;
      d.weight = mean_accuracy_weight(s.samples, e.first, e.last);
      return d;
    }
  }

  // (3) short and (4) medium vibration events
  if (!run.vibration) return std::nullopt;
  const Extent e = *run.vibration;
  const double span = s.cum_m[e.last] - s.cum_m[e.first];
  const auto& b = s.baselines[s.window_of[midpoint_sample(s, e)]];
  const double yz_base = b.var_gravity_y + b.var_gravity_z;
  if (!(yz_base > 0.0) || !(b.var_accel_x > 0.0)) return std::nullopt;
  const double yz = (mean_square(s.vib_gy, e) + mean_square(s.vib_gz, e)) / yz_base;
  const double x = mean_square(s.vib_ax, e) / b.var_accel_x;

  std::optional<SemanticKind> kind;
  if (span < c.short_max_m) {
    if (yz >= c.bump_min_yz_ratio) {
      kind = SemanticKind::kBump;
    } else if (yz <= c.cats_eye_max_yz_ratio && x >= c.cats_eye_min_x_ratio) {
      kind = SemanticKind::kCatsEye;
    }
  } else if (span >= c.railway_min_m && span <= c.railway_max_m && yz >= c.railway_min_yz_ratio) {
    kind = SemanticKind::kRailwayCrossing;
    if (index && crosses_railway(s, e, *index, c.railway_map_radius_m)) d.confidence = 2.0;
  }
  if (!kind) return std::nullopt;
  d.kind = *kind;
  d.location = s.samples[midpoint_sample(s, e)].location;
  d.span_length_m = span;
  d.t_start_ms = s.samples[e.first].timestamp_ms;
  d.t_end_ms = s.samples[e.last].timestamp_ms;
  d.weight = mean_accuracy_weight(s.samples, e.first, e.last);
  return d;
}

std::vector<SemanticDetection> vehicle_event_semantics(const std::string& trace_id,
                                                       std::span<const MotionFrameSample> samples,
                                                       const Config& config, const NetworkIndex* index) {
  std::vector<SemanticDetection> out;
  const auto windows = window_features(samples, config.window_s, config.window_overlap, config.rss_baseline_s,
                                       static_cast<std::size_t>(config.min_window_samples));
  if (windows.empty()) return out;
  const auto baselines = veh_baselines(windows, config);
  const auto signals = veh_signals(samples, windows, baselines, config);
  for (const auto& run : anomaly_runs(signals, config)) {
    if (auto d = classify_veh_event(run, signals, trace_id, config, index)) out.push_back(std::move(*d));
  }
  return out;
}

namespace {

std::vector<double> unwrap(std::span<const double> h) {
  std::vector<double> u(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) u[i] = i == 0 ? h[0] : u[i - 1] + wrap_angle(h[i] - h[i - 1]);
  return u;
}

std::vector<double> turn_rate(std::span<const double> t, const std::vector<double>& u) {
  const std::size_t n = u.size();
  std::vector<double> rate(n, 0.0);
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (lo < i && t[lo] < t[i] - 0.5) ++lo;
    while (hi + 1 < n && t[hi + 1] <= t[i] + 0.5) ++hi;
    if (hi < i) hi = i;
    if (t[hi] > t[lo]) rate[i] = (u[hi] - u[lo]) / (t[hi] - t[lo]);
  }
  return rate;
}

}  // namespace

HeadingShape heading_shape(std::span<const double> t_s, std::span<const double> heading_rad, const Config& config) {
  HeadingShape shape;
  if (heading_rad.size() < 2) return shape;
  const auto u = unwrap(heading_rad);
  const auto rate = turn_rate(t_s, u);
  shape.net_rad = u.back() - u.front();
  const double thr = config.turn_rate_min_rad_s;
  std::size_t i = 0;
  const std::size_t n = u.size();
  while (i < n) {
    if (std::abs(rate[i]) <= thr) {
      ++i;
      continue;
    }
    const bool positive = rate[i] > 0;
    std::size_t j = i;
    while (j + 1 < n && std::abs(rate[j + 1]) > thr && (rate[j + 1] > 0) == positive) ++j;
    const std::size_t a = i == 0 ? 0 : i - 1;
    const double turn = u[j] - u[a];
    if (!shape.runs_rad.empty() && (shape.runs_rad.back() > 0) == (turn > 0)) {
      shape.runs_rad.back() += turn;
    } else {
      shape.runs_rad.push_back(turn);
    }
    i = j + 1;
  }
  return shape;
}

HeadingClass classify_heading_feature(const HeadingShape& shape, bool junction_nearby, const Config& c) {
  double max_pos = 0.0, max_neg = 0.0;
  for (double r : shape.runs_rad) {
    if (r > 0) max_pos = std::max(max_pos, r);
    if (r < 0) max_neg = std::max(max_neg, -r);
  }
  const double opposing = c.roundabout_opposing_min_deg * kDegToRad;
  if (max_pos >= opposing && max_neg >= opposing && std::max(max_pos, max_neg) >= c.roundabout_major_min_deg * kDegToRad) {
    return HeadingClass::kRoundabout;
  }
  const double net = std::abs(shape.net_rad) * kRadToDeg;
  constexpr double tol = 1e-9;  // band edges are inclusive
  if (net >= c.turn_net_min_deg - tol && net <= c.turn_net_max_deg + tol) {
    return junction_nearby ? HeadingClass::kIntersectionTurn : HeadingClass::kTurn;
  }
  if (net < c.curve_net_max_deg) return HeadingClass::kCurve;
  return HeadingClass::kNone;
}

namespace {

std::optional<LatLon> circle_centre(std::span<const MotionFrameSample> s, std::size_t i0, std::size_t i1) {
  if (i1 < i0 + 5) return std::nullopt;
  const LocalFrame frame(s[i0].location);
  // Algebraic circle fit: x^2 + y^2 + D x + E y + F = 0.
  double m[3][3] = {{0}}, r[3] = {0};
  for (std::size_t i = i0; i <= i1; ++i) {
    const auto p = frame.to_local(s[i].location);
    const double row[3] = {p.east_m, p.north_m, 1.0};
    const double rhs = -(p.east_m * p.east_m + p.north_m * p.north_m);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m[a][b] += row[a] * row[b];
      r[a] += row[a] * rhs;
    }
  }
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-9) return std::nullopt;
  auto solve = [&](int col) {
    double t[3][3];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) t[a][b] = b == col ? r[a] : m[a][b];
    }
    return (t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0]) +
            t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])) /
           det;
  };
  const double D = solve(0), E = solve(1);
  return frame.to_geo({-D / 2, -E / 2});
}

bool junction_within(const NetworkIndex& index, const LatLon& p, double radius_m) {
  const auto& net = index.network();
  for (std::size_t e : index.edges_near(p, radius_m)) {
    for (const auto* id : {&net.edges()[e].from, &net.edges()[e].to}) {
      if (net.is_intersection(*id) && haversine_m(net.node(*id), p) <= radius_m) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<HeadingEvent> heading_events(std::span<const MotionFrameSample> samples, const Config& c,
                                         const NetworkIndex* index) {
  std::vector<HeadingEvent> events;
  const std::size_t n = samples.size();
  if (n < 3) return events;
  std::vector<double> t(n), h(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = 1e-3 * static_cast<double>(samples[i].timestamp_ms - samples[0].timestamp_ms);
    h[i] = samples[i].heading_rad;
  }
  const auto u = unwrap(h);
  const auto rate = turn_rate(t, u);

  std::vector<std::pair<std::size_t, std::size_t>> spans;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(rate[i]) <= c.turn_rate_min_rad_s) continue;
    if (!spans.empty() && t[i] - t[spans.back().second] < c.heading_event_gap_s) {
      spans.back().second = i;
    } else {
      spans.push_back({i, i});
    }
  }
  for (auto [a, b] : spans) {
    std::size_t first = a, last = b;
    while (first > 0 && t[a] - t[first - 1] <= c.heading_event_pad_s) --first;
    while (last + 1 < n && t[last + 1] - t[b] <= c.heading_event_pad_s) ++last;

    HeadingEvent ev;
    ev.first = first;
    ev.last = last;
    ev.shape = heading_shape(std::span(t).subspan(first, last - first + 1),
                             std::span(h).subspan(first, last - first + 1), c);
    double lat = 0.0, lon = 0.0;
    std::size_t count = 0;
    for (std::size_t i = a; i <= b; ++i) {
      if (std::abs(rate[i]) <= c.turn_rate_min_rad_s) continue;
      lat += samples[i].location.lat_deg;
      lon += samples[i].location.lon_deg;
      ++count;
    }
    ev.location = {lat / static_cast<double>(count), lon / static_cast<double>(count)};
    const bool junction = index && junction_within(*index, ev.location, c.junction_radius_m);
    ev.cls = classify_heading_feature(ev.shape, junction, c);
    if (ev.cls == HeadingClass::kRoundabout) {
      // Centre of the circulating stretch: the longest run against the
      // entry direction.
      std::size_t best_a = a, best_b = b, i = a;
      double best_turn = 0.0;
      while (i <= b) {
        if (std::abs(rate[i]) <= c.turn_rate_min_rad_s) {
          ++i;
          continue;
        }
        const bool positive = rate[i] > 0;
        std::size_t j = i;
        while (j + 1 <= b && std::abs(rate[j + 1]) > c.turn_rate_min_rad_s && (rate[j + 1] > 0) == positive) ++j;
        if (std::abs(u[j] - u[i]) > best_turn) {
          best_turn = std::abs(u[j] - u[i]);
          best_a = i;
          best_b = j;
        }
        i = j + 1;
      }
      if (auto centre = circle_centre(samples, best_a, best_b)) ev.location = *centre;
    }
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace mapsem
