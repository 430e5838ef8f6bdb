#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "mapsem/aggregation.hpp"
#include "mapsem/error.hpp"
#include "oracles.hpp"

using namespace mapsem;

namespace {

const LocalFrame kFrame({30.05, 31.23});

LatLon at(double e, double n) { return kFrame.to_geo({e, n}); }

SemanticDetection det(SemanticKind kind, LatLon p, double w, std::string trace = "t") {
  SemanticDetection d;
  d.kind = kind;
  d.trace_id = std::move(trace);
  d.location = p;
  d.weight = w;
  return d;
}

}  // namespace

TEST_CASE("dbscan examples") {
  CHECK(dbscan(std::vector{at(0, 0)}, 10, 3) == std::vector<int>{kNoise});
  CHECK(dbscan(std::vector<LatLon>{}, 10, 3).empty());

  std::vector<LatLon> blobs;
  for (int i = 0; i < 10; ++i) blobs.push_back(at(i % 3, i / 3));
  for (int i = 0; i < 10; ++i) blobs.push_back(at(100 + i % 3, i / 3));
  const auto l = dbscan(blobs, 20, 3);
  for (int i = 0; i < 10; ++i) CHECK(l[static_cast<std::size_t>(i)] == 0);
  for (int i = 10; i < 20; ++i) CHECK(l[static_cast<std::size_t>(i)] == 1);

  std::vector<LatLon> chain;
  for (int i = 0; i < 30; ++i) chain.push_back(at(5.0 * i, 0));
  const auto c = dbscan(chain, 6, 2);
  CHECK(std::all_of(c.begin(), c.end(), [](int x) { return x == 0; }));
}

TEST_CASE("border point joins the nearest core") {
  // Two core rows 20 m apart; the border point at x=10.2 reaches one core of
  // each and is nearer to the second row.
  std::vector<LatLon> p{at(0, 0), at(-1, 0), at(-2, 0), at(-3, 0), at(20, 0), at(21, 0), at(22, 0), at(23, 0), at(10.2, 0)};
  const auto l = dbscan(p, 10.3, 4);
  CHECK(l[0] == 0);
  CHECK(l[4] == 1);
  CHECK(l[8] == 1);
}

TEST_CASE("dbscan matches the naive oracle and ignores input order") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const auto pts = oracle::random_instance(rng, 300);
    const double eps = 5.0 + static_cast<double>(rng() % 25);
    const std::size_t min_pts = 1 + rng() % 6;
    const auto got = dbscan(pts, eps, min_pts);
    REQUIRE(oracle::canonical(got) == oracle::canonical(oracle::naive_dbscan(pts, eps, min_pts)));

    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int s = 0; s < 5; ++s) {
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<LatLon> shuffled;
      for (auto i : perm) shuffled.push_back(pts[i]);
      const auto l = dbscan(shuffled, eps, min_pts);
      std::vector<int> back(pts.size());
      for (std::size_t k = 0; k < perm.size(); ++k) back[perm[k]] = l[k];
      CHECK(oracle::canonical(back) == oracle::canonical(got));
    }
  }
}

TEST_CASE("weighted location examples") {
  const LatLon p{10, 20}, q{10.001, 20.002};
  const auto mid = weighted_location(std::vector{p, q}, std::vector{1.0, 1.0});
  CHECK(mid.lat_deg == doctest::Approx(10.0005).epsilon(1e-12));
  CHECK(mid.lon_deg == doctest::Approx(20.001).epsilon(1e-12));
  const auto w = weighted_location(std::vector<LatLon>{{0, 0}, {0.0004, 0}}, std::vector{1.0, 3.0});
  CHECK(w.lat_deg == doctest::Approx(0.0003).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_location(std::vector<LatLon>{}, std::vector<double>{}), Error);
  CHECK_THROWS_AS(weighted_location(std::vector{p}, std::vector{0.0}), Error);
}

TEST_CASE("weighted location is invariant to weight scaling") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<LatLon> pts;
    std::vector<double> w, w2;
    for (int i = 0; i < 7; ++i) {
      pts.push_back(at(u(rng) * 50, u(rng) * 50));
      w.push_back(u(rng));
      w2.push_back(w.back() * 4.0);  // power of two keeps the sums exact
    }
    const auto a = weighted_location(pts, w), b = weighted_location(pts, w2);
    CHECK(a.lat_deg == b.lat_deg);
    CHECK(a.lon_deg == b.lon_deg);
  }
}

TEST_CASE("fifteen-member centroids land within 2 m in at least 90% of trials") {
  std::mt19937_64 rng(12);
  int within = 0;
  for (int t = 0; t < 1000; ++t) within += oracle::centroid_error(rng, 15) <= 2.0;
  CHECK(within >= 900);
}

TEST_CASE("registry upsert") {
  Config c;
  Registry r(c);
  CHECK(r.upsert(det(SemanticKind::kBump, at(0, 0), 1.0)) == 0);
  auto s = r.snapshot();
  REQUIRE(s.size() == 1);
  CHECK(s[0].support() == 1);
  CHECK_FALSE(s[0].emitted);

  CHECK(r.upsert(det(SemanticKind::kBump, at(9, 0), 0.5)) == 0);
  s = r.snapshot();
  CHECK(kFrame.to_local(s[0].centroid).east_m == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.upsert(det(SemanticKind::kTunnel, at(3, 0), 1.0)) == 1);  // other kind
  CHECK(r.upsert(det(SemanticKind::kBump, at(40, 0), 1.0)) == 2);   // outside eps
  CHECK(r.upsert(det(SemanticKind::kBump, at(2, 1), 1.0)) == 0);
  s = r.snapshot();
  CHECK(s[0].emitted);
  CHECK_FALSE(s[2].emitted);
}

TEST_CASE("emission never reverts and support never decreases") {
  Config c;
  Registry r(c);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-200, 200);
  std::vector<FeatureCluster> prev;
  for (int i = 0; i < 400; ++i) {
    r.upsert(det(SemanticKind::kCrosswalk, at(u(rng), u(rng)), 0.2 + (i % 5) * 0.1));
    const auto now = r.snapshot();
    REQUIRE(now.size() >= prev.size());
    for (std::size_t k = 0; k < prev.size(); ++k) {
      CHECK(now[k].support() >= prev[k].support());
      if (prev[k].emitted) CHECK(now[k].emitted);
    }
    prev = now;
  }
}

TEST_CASE("incremental and batch clustering agree on separated clusters") {
  Config c;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SemanticDetection> ds;
    const int clusters = 2 + trial % 5;
    for (int k = 0; k < clusters; ++k) {
      const int members = 3 + static_cast<int>(rng() % 10);
      for (int m = 0; m < members; ++m) {
        ds.push_back(det(SemanticKind::kBump, at(100.0 * k + g(rng), g(rng)), 0.1 + 0.05 * (m % 7)));
      }
    }
    std::shuffle(ds.begin(), ds.end(), rng);
    Registry r(c);
    for (const auto& d : ds) r.upsert(d);
    const auto inc = r.snapshot();
    const auto batch = cluster_detections(ds, c);
    REQUIRE(inc.size() == batch.size());
    for (const auto& b : batch) {
      const auto it = std::find_if(inc.begin(), inc.end(), [&](const FeatureCluster& x) {
        return haversine_m(x.centroid, b.centroid) < 1e-6;
      });
      REQUIRE(it != inc.end());
      CHECK(it->support() == b.support());
      CHECK(it->emitted == b.emitted);
    }
  }
}

TEST_CASE("registry log replays to the same clusters") {
  Config c;
  const auto path = (std::filesystem::temp_directory_path() / "mapsem_registry_test.jsonl").string();
  std::filesystem::remove(path);
  Registry r(c);
  r.attach_log(path);
  for (int i = 0; i < 12; ++i) r.upsert(det(i % 2 ? SemanticKind::kStairs : SemanticKind::kBump, at(i * 3.0, 0), 0.3));
  Registry back(c);
  back.replay(path);
  const auto a = r.snapshot(), b = back.snapshot();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].support() == b[i].support());
    CHECK(a[i].centroid.lat_deg == b[i].centroid.lat_deg);
    CHECK(a[i].centroid.lon_deg == b[i].centroid.lon_deg);
  }
  std::filesystem::remove(path);
}

TEST_CASE("map feature attributes and GeoJSON round trip") {
  Config c;
  FeatureCluster cl{SemanticKind::kCrosswalk, {}, {}, 0.0, true};
  for (double len : {11.0, 7.2, 9.0}) {
    auto d = det(SemanticKind::kCrosswalk, at(len, 0), 0.25);
    d.crossing_length_m = len;
    cl.members.push_back(d);
  }
  cl.centroid = weighted_location(std::vector{at(11, 0), at(7.2, 0), at(9, 0)}, std::vector{0.25, 0.25, 0.25});
  const auto f = to_map_feature(cl, c);
  CHECK(f.lane_count == 2);
  CHECK(f.support == 3);

  FeatureCluster fb{SemanticKind::kFootbridge, {}, at(0, 0), 1.0, true};
  for (int steps : {30, 28, 31}) {
    auto d = det(SemanticKind::kFootbridge, at(0, 0), 1.0);
    d.step_count = steps;
    fb.members.push_back(d);
  }
  const auto ff = to_map_feature(fb, c);
  CHECK(ff.step_count == 30);
  CHECK(*ff.height_m == doctest::Approx(30 * 0.17));

  const FeatureSet set{"abc", {"t1", "t2"}, {f, ff}};
  const auto j = to_geojson(set);
  const auto back = from_geojson(nlohmann::json::parse(j.dump()));
  CHECK(back.config_hash == "abc");
  CHECK(back.trace_ids == set.trace_ids);
  REQUIRE(back.features.size() == 2);
  CHECK(back.features[0].lane_count == 2);
  CHECK(back.features[1].step_count == 30);
  CHECK(to_geojson(back).dump() == j.dump());
}
