#pragma once

// Independent reference implementations shared by unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "mapsem/aggregation.hpp"
#include "mapsem/geo.hpp"
#include "mapsem/lowess.hpp"

namespace oracle {

using mapsem::LatLon;

/// Textbook O(n^2) DBSCAN over a full distance matrix with the same
/// conventions as the library (self counts as a neighbour; border points go
/// to the nearest core, lowest index on ties).
inline std::vector<int> naive_dbscan(const std::vector<LatLon>& p, double eps, std::size_t min_pts) {
  const std::size_t n = p.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i][j] = mapsem::haversine_m(p[i], p[j]);
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) c += d[i][j] <= eps;
    core[i] = c >= min_pts;
  }
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] >= 0) continue;
    std::vector<std::size_t> queue{i};
    label[i] = next;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      for (std::size_t j = 0; j < n; ++j) {
        if (core[j] && label[j] < 0 && d[queue[q]][j] <= eps) {
          label[j] = next;
          queue.push_back(j);
        }
      }
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best = eps + 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && d[i][j] <= eps && d[i][j] < best) {
        best = d[i][j];
        label[i] = label[j];
      }
    }
  }
  return label;
}

/// Relabels clusters in order of first appearance; noise stays -1.
inline std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> rename;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      out[i] = -1;
      continue;
    }
    auto [it, inserted] = rename.emplace(labels[i], static_cast<int>(rename.size()));
    out[i] = it->second;
  }
  return out;
}

/// Blobs plus background clutter within about 1 km.
inline std::vector<LatLon> random_instance(std::mt19937_64& rng, std::size_t max_points) {
  std::uniform_int_distribution<std::size_t> count(1, max_points);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const mapsem::LocalFrame frame({30.0 + u(rng) / 100.0, 31.0 + u(rng) / 100.0});
  const std::size_t n = count(rng);
  std::vector<mapsem::EastNorth> centres(1 + n / 40);
  for (auto& c : centres) c = {u(rng), u(rng)};
  std::vector<LatLon> pts;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 4 == 0) {
      pts.push_back(frame.to_geo({u(rng), u(rng)}));
    } else {
      const auto& c = centres[rng() % centres.size()];
      const double s = 5.0 + 20.0 * static_cast<double>(rng() % 3);
      pts.push_back(frame.to_geo({c.east_m + s * g(rng), c.north_m + s * g(rng)}));
    }
  }
  return pts;
}

/// Weighted-centroid error of one cluster: members carry a location
/// accuracy a ~ U[1, 9] m, their error is isotropic Gaussian with radial RMS
/// equal to a (mean radial RMS 5 m), and weights come from the accuracy
/// formula.
inline double centroid_error(std::mt19937_64& rng, std::size_t members) {
  std::uniform_real_distribution<double> acc(1.0, 9.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const LatLon truth{31.2, 29.9};
  const mapsem::LocalFrame frame(truth);
  std::vector<LatLon> pts;
  std::vector<double> w;
  for (std::size_t i = 0; i < members; ++i) {
    const double a = acc(rng);
    const double s = a / std::sqrt(2.0);
    pts.push_back(frame.to_geo({s * g(rng), s * g(rng)}));
    w.push_back(mapsem::accuracy_weight(a));
  }
  return mapsem::haversine_m(mapsem::weighted_location(pts, w), truth);
}

// Direct weighted least squares at each point: sort all points by distance,
// keep the q nearest, weight by tricube of distance / (q-th distance), and
// solve the centered normal equations.
inline std::vector<double> lowess(const std::vector<mapsem::TimedValue>& s, std::size_t q) {
  std::vector<double> out;
  for (const auto& p : s) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < s.size(); ++j) d.push_back({std::abs(s[j].t - p.t), j});
    std::sort(d.begin(), d.end());
    const double h = d[q - 1].first;
    double sw = 0, sx = 0, sy = 0;
    std::vector<std::pair<double, std::size_t>> used;
    for (std::size_t k = 0; k < q; ++k) {
      const double u = d[k].first / h;
      const double w = u < 1 ? std::pow(1 - u * u * u, 3) : 0.0;
      if (w == 0) continue;
      used.push_back({w, d[k].second});
      sw += w;
      sx += w * s[d[k].second].t;
      sy += w * s[d[k].second].value;
    }
    const double mx = sx / sw, my = sy / sw;
    double cxx = 0, cxy = 0;
    for (auto [w, j] : used) {
      cxx += w * (s[j].t - mx) * (s[j].t - mx);
      cxy += w * (s[j].t - mx) * (s[j].value - my);
    }
    out.push_back(cxx > 0 ? my + cxy / cxx * (p.t - mx) : my);
  }
  return out;
}

}  // namespace oracle
