#pragma once

#include <string>
#include <vector>

#include "mapsem/aggregation.hpp"
#include "mapsem/config.hpp"
#include "mapsem/network_index.hpp"
#include "mapsem/regulators.hpp"
#include "mapsem/semantics.hpp"
#include "mapsem/trace.hpp"

namespace mapsem {

/// Everything one trace contributes before aggregation.
struct TraceResult {
  std::string trace_id;
  std::vector<SemanticDetection> detections;
  std::vector<SemanticDetection> turn_candidates;  // turns away from any mapped junction
  std::vector<ApproachObservation> observations;
};

/// Validates, segments and classifies one trace. Throws the validation
/// error of a malformed trace.
TraceResult classify_trace(const Trace& trace, const NetworkIndex& index, const Config& config);

struct PipelineOutput {
  std::vector<SemanticDetection> detections;
  FeatureSet features;
};

/// Per-trace classification (in parallel) followed by regulator inference,
/// promotion of repeated unmapped turns, and clustering. The output order
/// is independent of thread scheduling.
PipelineOutput run_pipeline(const std::vector<Trace>& traces, const RoadNetwork& network, const Config& config);

/// Clusters detections into emitted map features, sorted by kind then
/// position.
FeatureSet build_features(const std::vector<SemanticDetection>& detections, std::vector<std::string> trace_ids,
                          const Config& config);

}  // namespace mapsem
