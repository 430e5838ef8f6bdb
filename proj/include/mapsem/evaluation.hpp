#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapsem/aggregation.hpp"
#include "mapsem/semantics.hpp"
#include "mapsem/simulator.hpp"

namespace mapsem {

inline constexpr std::size_t kKindCount = kAllKinds.size();

struct LocationErrorPoint {
  std::size_t samples{0};
  std::size_t clusters{0};
  double median_m{0.0};
  double p90_m{0.0};
};

/// Rows are truth kinds, columns predicted kinds plus "unclassified".
/// Per-kind FP = (features of kind k matched to another kind's truth +
/// unmatched features of kind k) / truth count of k; FN = truth of kind k not
/// matched as k / truth count of k.
struct EvaluationReport {
  double match_radius_m{20.0};
  std::array<std::array<std::size_t, kKindCount + 1>, kKindCount> confusion{};
  std::array<std::size_t, kKindCount> spurious{};
  /// Centroid errors of the first n detections per matched truth, by n.
  std::map<std::size_t, std::vector<double>> curve_errors_m;
  std::vector<double> feature_errors_m;  // matched feature to truth distance

  std::vector<LocationErrorPoint> location_curve() const;

  std::size_t truth_count(SemanticKind k) const;
  std::size_t false_positives(SemanticKind k) const;
  std::size_t false_negatives(SemanticKind k) const;
  double fp_rate(SemanticKind k) const;
  double fn_rate(SemanticKind k) const;
  /// Pooled rates over a kind group (numerators and truth counts summed).
  double overall_fp(bool vehicle) const;
  double overall_fn(bool vehicle) const;

  /// Adds another report's counts (used across benchmark scenarios).
  void merge(const EvaluationReport& other);

  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

/// Matches features to truth instances. Same-kind pairs within the radius
/// are matched first, nearest first; leftover truth then pairs with the
/// nearest leftover feature of another kind; the rest is unclassified or
/// spurious. Detections, if given, feed the location-error curve. Throws
/// Error(kProvenanceMismatch) when a feature set or detection names a trace
/// outside the truth.
EvaluationReport evaluate(const FeatureSet& features, const sim::GroundTruth& truth, double match_radius_m,
                          const std::vector<SemanticDetection>& detections = {});

}  // namespace mapsem
