#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mapsem/error.hpp"
#include "mapsem/evaluation.hpp"

using namespace mapsem;

namespace {

const LocalFrame kFrame({29.95, 31.10});

LatLon at(double e, double n = 0.0) { return kFrame.to_geo({e, n}); }

sim::GroundTruth truth_with(SemanticKind kind, int count, double spacing = 200.0) {
  sim::GroundTruth t;
  t.scenario = "s";
  t.trace_ids = {"s/a", "s/b", "s/c"};
  for (int i = 0; i < count; ++i) {
    sim::TruthInstance in;
    in.semantic_id = "x" + std::to_string(i);
    in.kind = kind;
    in.location = at(spacing * i);
    in.traversals = 3;
    t.instances.push_back(in);
  }
  return t;
}

MapFeature feature(SemanticKind kind, LatLon p) {
  MapFeature f;
  f.kind = kind;
  f.location = p;
  return f;
}

FeatureSet features_on(const sim::GroundTruth& t, double offset_m) {
  FeatureSet fs;
  fs.trace_ids = t.trace_ids;
  for (const auto& in : t.instances) {
    const auto p = kFrame.to_local(in.location);
    fs.features.push_back(feature(in.kind, kFrame.to_geo({p.east_m, p.north_m + offset_m})));
  }
  return fs;
}

std::size_t row_sum(const EvaluationReport& r, SemanticKind k) {
  std::size_t n = 0;
  for (auto c : r.confusion[static_cast<std::size_t>(k)]) n += c;
  return n;
}

}  // namespace

TEST_CASE("perfect features: diagonal only, FP = FN = 0") {
  const auto truth = truth_with(SemanticKind::kBump, 10);
  const auto r = evaluate(features_on(truth, 3.0), truth, 20.0);
  CHECK(r.confusion[static_cast<std::size_t>(SemanticKind::kBump)][static_cast<std::size_t>(SemanticKind::kBump)] == 10);
  CHECK(r.fp_rate(SemanticKind::kBump) == 0.0);
  CHECK(r.fn_rate(SemanticKind::kBump) == 0.0);
  CHECK(r.overall_fp(true) == 0.0);
  CHECK(r.overall_fn(true) == 0.0);
  CHECK(r.feature_errors_m.size() == 10);
}

TEST_CASE("one spurious bump among 33 gives FP = 1/33") {
  const auto truth = truth_with(SemanticKind::kBump, 33);
  auto fs = features_on(truth, 0.0);
  fs.features.push_back(feature(SemanticKind::kBump, at(100.0, 500.0)));
  const auto r = evaluate(fs, truth, 20.0);
  CHECK(r.false_positives(SemanticKind::kBump) == 1);
  CHECK(r.fp_rate(SemanticKind::kBump) == doctest::Approx(1.0 / 33.0));
  CHECK(r.fn_rate(SemanticKind::kBump) == 0.0);
}

TEST_CASE("misclassification, misses and radius; rows sum to truth counts") {
  auto truth = truth_with(SemanticKind::kBump, 4);
  auto extra = truth_with(SemanticKind::kCatsEye, 2, 300.0);
  for (auto& in : extra.instances) {
    in.semantic_id += "c";
    in.location = kFrame.to_geo({kFrame.to_local(in.location).east_m, 1000.0});
    truth.instances.push_back(in);
  }
  FeatureSet fs;
  fs.trace_ids = truth.trace_ids;
  fs.features.push_back(feature(SemanticKind::kBump, at(0, 5)));         // hit
  fs.features.push_back(feature(SemanticKind::kCatsEye, at(200, 5)));    // bump called cats eye
  fs.features.push_back(feature(SemanticKind::kBump, at(400, 25)));      // outside 20 m: spurious, truth missed
  fs.features.push_back(feature(SemanticKind::kCatsEye, at(0, 1000)));   // hit
  const auto r = evaluate(fs, truth, 20.0);
  const auto b = static_cast<std::size_t>(SemanticKind::kBump);
  const auto c = static_cast<std::size_t>(SemanticKind::kCatsEye);
  CHECK(r.confusion[b][b] == 1);
  CHECK(r.confusion[b][c] == 1);
  CHECK(r.confusion[b][kKindCount] == 2);
  CHECK(r.confusion[c][c] == 1);
  CHECK(r.confusion[c][kKindCount] == 1);
  CHECK(r.spurious[b] == 1);
  CHECK(row_sum(r, SemanticKind::kBump) == 4);
  CHECK(row_sum(r, SemanticKind::kCatsEye) == 2);
  CHECK(r.fn_rate(SemanticKind::kBump) == doctest::Approx(3.0 / 4.0));
  CHECK(r.fp_rate(SemanticKind::kBump) == doctest::Approx(1.0 / 4.0));
  CHECK(r.fp_rate(SemanticKind::kCatsEye) == doctest::Approx(1.0 / 2.0));
  for (auto k : kAllKinds) {
    CHECK(r.fp_rate(k) >= 0.0);
    CHECK(r.fp_rate(k) <= 1.0);
    CHECK(r.fn_rate(k) >= 0.0);
    CHECK(r.fn_rate(k) <= 1.0);
  }
  // Pooled over vehicle kinds: (2 FP) / 6 truths, (4 FN) / 6 truths.
  CHECK(r.overall_fp(true) == doctest::Approx(2.0 / 6.0));
  CHECK(r.overall_fn(true) == doctest::Approx(4.0 / 6.0));

  const auto j = r.to_json();
  CHECK(j["per_kind"]["bump"]["truth"] == 4);
  CHECK(j["confusion"]["bump"]["unclassified"] == 2);
  CHECK(r.to_table().find("bump") != std::string::npos);
}

TEST_CASE("location curve uses the first n detections near each matched truth") {
  const auto truth = truth_with(SemanticKind::kBump, 1);
  std::vector<SemanticDetection> dets;
  for (int i = 0; i < 15; ++i) {
    SemanticDetection d;
    d.kind = SemanticKind::kBump;
    d.trace_id = "s/a";
    d.t_start_ms = i;
    d.location = at(i < 3 ? 6.0 : 0.0);  // the first three are 6 m east
    d.weight = 1.0;
    dets.push_back(d);
  }
  const auto r = evaluate(features_on(truth, 0.0), truth, 20.0, dets);
  const auto curve = r.location_curve();
  REQUIRE(curve.size() == 4);
  CHECK(curve[0].samples == 3);
  CHECK(curve[0].median_m == doctest::Approx(6.0).epsilon(0.01));
  CHECK(curve[1].median_m == doctest::Approx(3.6).epsilon(0.01));
  CHECK(curve[3].samples == 15);
  CHECK(curve[3].median_m == doctest::Approx(1.2).epsilon(0.01));
}

TEST_CASE("merge adds counts") {
  const auto truth = truth_with(SemanticKind::kStairs, 3);
  auto a = evaluate(features_on(truth, 0.0), truth, 20.0);
  const auto b = evaluate(FeatureSet{{}, truth.trace_ids, {}}, truth, 20.0);
  a.merge(b);
  CHECK(a.truth_count(SemanticKind::kStairs) == 6);
  CHECK(a.overall_fn(false) == doctest::Approx(0.5));
}

TEST_CASE("provenance mismatch") {
  const auto truth = truth_with(SemanticKind::kBump, 2);
  auto fs = features_on(truth, 0.0);
  fs.trace_ids.push_back("other/z");
  try {
    evaluate(fs, truth, 20.0);
    FAIL("expected ProvenanceMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kProvenanceMismatch);
  }
  SemanticDetection d;
  d.trace_id = "other/z";
  CHECK_THROWS_AS(evaluate(features_on(truth, 0.0), truth, 20.0, {d}), Error);
}
