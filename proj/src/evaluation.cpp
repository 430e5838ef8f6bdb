#include "mapsem/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include "mapsem/error.hpp"

namespace mapsem {

namespace {

constexpr std::array<std::size_t, 4> kCurveSizes{3, 5, 10, 15};

std::size_t idx(SemanticKind k) { return static_cast<std::size_t>(k); }

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double rate(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : std::min(1.0, static_cast<double>(num) / static_cast<double>(den));
}

}  // namespace

std::size_t EvaluationReport::truth_count(SemanticKind k) const {
  std::size_t n = 0;
  for (auto c : confusion[idx(k)]) n += c;
  return n;
}

std::size_t EvaluationReport::false_positives(SemanticKind k) const {
  std::size_t n = spurious[idx(k)];
  for (std::size_t r = 0; r < kKindCount; ++r) {
    if (r != idx(k)) n += confusion[r][idx(k)];
  }
  return n;
}

std::size_t EvaluationReport::false_negatives(SemanticKind k) const {
  return truth_count(k) - confusion[idx(k)][idx(k)];
}

double EvaluationReport::fp_rate(SemanticKind k) const { return rate(false_positives(k), truth_count(k)); }
double EvaluationReport::fn_rate(SemanticKind k) const { return rate(false_negatives(k), truth_count(k)); }

double EvaluationReport::overall_fp(bool vehicle) const {
  std::size_t num = 0, den = 0;
  for (auto k : kAllKinds) {
    if (is_vehicle_kind(k) != vehicle) continue;
    num += false_positives(k);
    den += truth_count(k);
  }
  return rate(num, den);
}

double EvaluationReport::overall_fn(bool vehicle) const {
  std::size_t num = 0, den = 0;
  for (auto k : kAllKinds) {
    if (is_vehicle_kind(k) != vehicle) continue;
    num += false_negatives(k);
    den += truth_count(k);
  }
  return rate(num, den);
}

void EvaluationReport::merge(const EvaluationReport& other) {
  for (std::size_t r = 0; r < kKindCount; ++r) {
    for (std::size_t c = 0; c <= kKindCount; ++c) confusion[r][c] += other.confusion[r][c];
    spurious[r] += other.spurious[r];
  }
  for (const auto& [n, errs] : other.curve_errors_m) {
    auto& mine = curve_errors_m[n];
    mine.insert(mine.end(), errs.begin(), errs.end());
  }
  feature_errors_m.insert(feature_errors_m.end(), other.feature_errors_m.begin(), other.feature_errors_m.end());
}

std::vector<LocationErrorPoint> EvaluationReport::location_curve() const {
  std::vector<LocationErrorPoint> out;
  for (auto n : kCurveSizes) {
    const auto it = curve_errors_m.find(n);
    LocationErrorPoint p;
    p.samples = n;
    if (it != curve_errors_m.end()) {
      p.clusters = it->second.size();
      p.median_m = percentile(it->second, 0.5);
      p.p90_m = percentile(it->second, 0.9);
    }
    out.push_back(p);
  }
  return out;
}

nlohmann::ordered_json EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  j["match_radius_m"] = match_radius_m;
  nlohmann::ordered_json conf, kinds;
  for (auto k : kAllKinds) {
    nlohmann::ordered_json row;
    for (auto c : kAllKinds) row[std::string(kind_name(c))] = confusion[idx(k)][idx(c)];
    row["unclassified"] = confusion[idx(k)][kKindCount];
    conf[std::string(kind_name(k))] = row;
    kinds[std::string(kind_name(k))] = {{"truth", truth_count(k)},
                                        {"matched", confusion[idx(k)][idx(k)]},
                                        {"spurious", spurious[idx(k)]},
                                        {"false_positives", false_positives(k)},
                                        {"false_negatives", false_negatives(k)},
                                        {"fp_rate", fp_rate(k)},
                                        {"fn_rate", fn_rate(k)}};
  }
  j["confusion"] = conf;
  j["per_kind"] = kinds;
  j["overall"] = {{"vehicle", {{"fp_rate", overall_fp(true)}, {"fn_rate", overall_fn(true)}}},
                  {"pedestrian", {{"fp_rate", overall_fp(false)}, {"fn_rate", overall_fn(false)}}}};
  nlohmann::ordered_json curve = nlohmann::ordered_json::array();
  for (const auto& p : location_curve()) {
    curve.push_back({{"samples", p.samples}, {"clusters", p.clusters}, {"median_m", p.median_m}, {"p90_m", p.p90_m}});
  }
  j["location_error_curve"] = curve;
  j["feature_error_m"] = {{"count", feature_errors_m.size()},
                          {"median", percentile(feature_errors_m, 0.5)},
                          {"p90", percentile(feature_errors_m, 0.9)}};
  return j;
}

std::string EvaluationReport::to_table() const {
  std::ostringstream out;
  char buf[160];
  out << "truth \\ predicted";
  for (std::size_t c = 0; c < kKindCount; ++c) {
    std::snprintf(buf, sizeof buf, " %5s", std::string(kind_name(kAllKinds[c])).substr(0, 5).c_str());
    out << buf;
  }
  out << " uncl.   FP    FN\n";
  for (auto k : kAllKinds) {
    if (truth_count(k) == 0 && false_positives(k) == 0) continue;
    std::snprintf(buf, sizeof buf, "%-17s", std::string(kind_name(k)).c_str());
    out << buf;
    for (std::size_t c = 0; c <= kKindCount; ++c) {
      std::snprintf(buf, sizeof buf, " %5zu", confusion[idx(k)][c]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, " %5.2f %5.2f\n", fp_rate(k), fn_rate(k));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "vehicle overall     FP %.3f  FN %.3f\n", overall_fp(true), overall_fn(true));
  out << buf;
  std::snprintf(buf, sizeof buf, "pedestrian overall  FP %.3f  FN %.3f\n", overall_fp(false), overall_fn(false));
  out << buf;
  for (const auto& p : location_curve()) {
    std::snprintf(buf, sizeof buf, "location error, %2zu samples: median %.2f m, p90 %.2f m (%zu clusters)\n", p.samples,
                  p.median_m, p.p90_m, p.clusters);
    out << buf;
  }
  return out.str();
}

EvaluationReport evaluate(const FeatureSet& features, const sim::GroundTruth& truth, double match_radius_m,
                          const std::vector<SemanticDetection>& detections) {
  const std::set<std::string> known(truth.trace_ids.begin(), truth.trace_ids.end());
  for (const auto& id : features.trace_ids) {
    if (!known.count(id)) throw Error(ErrorCode::kProvenanceMismatch, "feature set uses trace '" + id + "' not in the truth");
  }
  for (const auto& d : detections) {
    if (!d.trace_id.empty() && !known.count(d.trace_id)) {
      throw Error(ErrorCode::kProvenanceMismatch, "detection from trace '" + d.trace_id + "' not in the truth");
    }
  }

  EvaluationReport rep;
  rep.match_radius_m = match_radius_m;
  const auto& inst = truth.instances;
  const auto& feat = features.features;
  std::vector<bool> truth_used(inst.size(), false), feat_used(feat.size(), false);

  struct Pair {
    double d;
    std::size_t t, f;
  };
  auto match = [&](bool same_kind) {
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < inst.size(); ++t) {
      if (truth_used[t]) continue;
      for (std::size_t f = 0; f < feat.size(); ++f) {
        if (feat_used[f] || (feat[f].kind == inst[t].kind) != same_kind) continue;
        const double d = haversine_m(inst[t].location, feat[f].location);
        if (d <= match_radius_m) pairs.push_back({d, t, f});
      }
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const Pair& a, const Pair& b) { return std::tie(a.d, a.t, a.f) < std::tie(b.d, b.t, b.f); });
    for (const auto& p : pairs) {
      if (truth_used[p.t] || feat_used[p.f]) continue;
      truth_used[p.t] = feat_used[p.f] = true;
      ++rep.confusion[idx(inst[p.t].kind)][idx(feat[p.f].kind)];
      if (same_kind) rep.feature_errors_m.push_back(p.d);
    }
  };
  match(true);
  std::vector<bool> matched_same = truth_used;
  match(false);
  for (std::size_t t = 0; t < inst.size(); ++t) {
    if (!truth_used[t]) ++rep.confusion[idx(inst[t].kind)][kKindCount];
  }
  for (std::size_t f = 0; f < feat.size(); ++f) {
    if (!feat_used[f]) ++rep.spurious[idx(feat[f].kind)];
  }

  // Location error against the number of contributing detections.
  for (std::size_t t = 0; t < inst.size(); ++t) {
    if (!matched_same[t]) continue;
    std::vector<const SemanticDetection*> near;
    for (const auto& d : detections) {
      if (d.kind == inst[t].kind && haversine_m(d.location, inst[t].location) <= match_radius_m) near.push_back(&d);
    }
    std::sort(near.begin(), near.end(), [](const SemanticDetection* a, const SemanticDetection* b) {
      return std::tie(a->trace_id, a->t_start_ms) < std::tie(b->trace_id, b->t_start_ms);
    });
    for (auto n : kCurveSizes) {
      if (near.size() < n) break;
      std::vector<LatLon> pts;
      std::vector<double> w;
      for (std::size_t i = 0; i < n; ++i) {
        pts.push_back(near[i]->location);
        w.push_back(near[i]->weight);
      }
      rep.curve_errors_m[n].push_back(haversine_m(weighted_location(pts, w), inst[t].location));
    }
  }
  return rep;
}

}  // namespace mapsem
