#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mapsem/trace.hpp"

namespace mapsem::io {

// Trace files are JSON Lines: one SensorSample per line in snake_case, plus a
// "trace_id" field that groups lines into traces. Absent channels are omitted.

nlohmann::ordered_json sample_to_json(const SensorSample& s);
SensorSample sample_from_json(const nlohmann::json& j);

void write_trace(std::ostream& out, const Trace& trace);
void write_traces(std::ostream& out, const std::vector<Trace>& traces);

/// 1-based source line of every sample, per trace.
using SampleLines = std::vector<std::vector<std::size_t>>;

/// Parses a JSON Lines trace stream. Traces are returned in first-seen order.
/// Throws Error(kParse) naming `source` and the 1-based line number. When
/// `lines` is given it receives the source line of each sample.
std::vector<Trace> read_traces(std::istream& in, const std::string& source = "<stream>",
                               SampleLines* lines = nullptr);
std::vector<Trace> read_traces_file(const std::string& path, SampleLines* lines = nullptr);

nlohmann::ordered_json network_to_json(const RoadNetwork& net);
RoadNetwork network_from_json(const nlohmann::json& j);
RoadNetwork read_network_file(const std::string& path);

std::string edge_kind_name(EdgeKind kind);

/// Writes `text` to `path`, throwing Error(kIo) on failure.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace mapsem::io
