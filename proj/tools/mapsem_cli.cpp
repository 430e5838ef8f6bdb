// mapsem command-line driver: simulate, classify, cluster, evaluate, export.
//
// Exit codes: 0 success, 1 internal error, 2 bad input.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapsem/aggregation.hpp"
#include "mapsem/config.hpp"
#include "mapsem/error.hpp"
#include "mapsem/evaluation.hpp"
#include "mapsem/pipeline.hpp"
#include "mapsem/simulator.hpp"
#include "mapsem/trace.hpp"
#include "mapsem/trace_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace mapsem;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

/// Input problem detected by the CLI itself (as opposed to a library Error).
struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json parse_json_file(const std::string& path) {
  const std::string text = io::read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

Config load_config(const std::string& path) {
  if (path.empty()) return Config{};
  try {
    return Config::from_json(parse_json_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory " + dir + ": " + ec.message());
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- simulate

std::string prefixed(const std::string& scope, const std::string& id) { return scope + ":" + id; }

/// Folds a suite into one network, truth set and trace list. Node and
/// semantic ids gain the scenario name as a prefix so they stay unique.
sim::Simulation merge_suite(const std::vector<sim::Scenario>& suite, std::uint64_t seed, RoadNetwork& network) {
  sim::Simulation all;
  all.truth.scenario = "benchmark";
  all.truth.seed = seed;
  std::map<std::string, LatLon> nodes;
  std::vector<RoadEdge> edges;
  for (const auto& sc : suite) {
    for (const auto& [id, p] : sc.network.nodes()) nodes[prefixed(sc.name, id)] = p;
    for (const auto& e : sc.network.edges()) edges.push_back({prefixed(sc.name, e.from), prefixed(sc.name, e.to), e.kind});

    auto one = sim::simulate(sc);
    for (auto& t : one.traces) all.traces.push_back(std::move(t));
    for (auto& id : one.truth.trace_ids) all.truth.trace_ids.push_back(std::move(id));
    for (auto in : one.truth.instances) {
      in.semantic_id = prefixed(sc.name, in.semantic_id);
      all.truth.instances.push_back(std::move(in));
    }
    for (auto sp : one.truth.spans) {
      sp.semantic_id = prefixed(sc.name, sp.semantic_id);
      all.truth.spans.push_back(std::move(sp));
    }
  }
  network = RoadNetwork(std::move(nodes), std::move(edges));
  return all;
}

int cmd_simulate(const std::string& scenario_arg, std::optional<std::uint64_t> seed_arg, const std::string& out_dir) {
  RoadNetwork network;
  sim::Simulation result;
  ordered_json echo;
  std::string echo_name;
  if (scenario_arg == "benchmark") {
    const std::uint64_t seed = seed_arg.value_or(kDefaultSeed);
    const auto suite = sim::build_benchmark(seed);
    result = merge_suite(suite, seed, network);
    echo = sim::benchmark_manifest(suite);
    echo_name = "manifest.json";
  } else {
    sim::Scenario sc;
    try {
      sc = sim::scenario_from_json(parse_json_file(scenario_arg));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kInvalidScenario, scenario_arg + ": " + e.what());
    }
    if (seed_arg) sc.seed = *seed_arg;
    result = sim::simulate(sc);
    network = sc.network;
    echo = sim::scenario_to_json(sc);
    echo_name = "scenario.json";
  }

  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  {
    std::ostringstream traces;
    io::write_traces(traces, result.traces);
    io::write_text_file((dir / "traces.jsonl").string(), traces.str());
  }
  io::write_text_file((dir / "network.json").string(), dump(io::network_to_json(network)));
  io::write_text_file((dir / "truth.json").string(), dump(sim::truth_to_json(result.truth)));
  io::write_text_file((dir / echo_name).string(), dump(echo));

  std::size_t samples = 0;
  for (const auto& t : result.traces) samples += t.samples.size();
  std::cout << "simulated " << result.traces.size() << " traces, " << samples << " samples, "
            << result.truth.instances.size() << " truth instances -> " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- classify

/// Validates every trace up front so a rejection can name its source line.
void validate_with_lines(const std::vector<Trace>& traces, const io::SampleLines& lines, const std::string& path) {
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto checked = validate_trace(traces[i]);
    if (const auto* r = std::get_if<Rejection>(&checked)) {
      const auto& where = lines[i];
      const std::size_t line = where.empty() ? 0 : where[std::min(r->sample_index, where.size() - 1)];
      throw Error(r->code, path + ":" + std::to_string(line) + ": trace '" + traces[i].trace_id + "': " + r->detail);
    }
  }
}

std::string detections_jsonl(const std::vector<SemanticDetection>& dets) {
  std::ostringstream out;
  for (const auto& d : dets) out << detection_to_json(d).dump() << '\n';
  return out.str();
}

int cmd_classify(const std::string& traces_path, const std::string& network_path, const std::string& config_path,
                 const std::string& out_dir) {
  const Config config = load_config(config_path);
  io::SampleLines lines;
  const auto traces = io::read_traces_file(traces_path, &lines);
  validate_with_lines(traces, lines, traces_path);

  PipelineOutput out;
  if (traces.empty()) {
    out.features.config_hash = config.hash();
  } else {
    const RoadNetwork network = io::read_network_file(network_path);
    out = run_pipeline(traces, network, config);
  }

  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  io::write_text_file((dir / "detections.jsonl").string(), detections_jsonl(out.detections));
  io::write_text_file((dir / "features.geojson").string(), dump(to_geojson(out.features)));
  std::cout << "classified " << traces.size() << " traces: " << out.detections.size() << " detections, "
            << out.features.features.size() << " features -> " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- cluster

std::vector<SemanticDetection> read_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<SemanticDetection> dets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      dets.push_back(detection_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParse, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dets;
}

FeatureSet cluster_file(const std::string& detections_path, const Config& config) {
  const auto dets = read_detections(detections_path);
  std::vector<std::string> ids;
  for (const auto& d : dets) {
    if (!d.trace_id.empty()) ids.push_back(d.trace_id);
  }
  return build_features(dets, std::move(ids), config);
}

int cmd_cluster(const std::string& detections_path, const std::string& config_path, const std::string& out_path) {
  const FeatureSet set = cluster_file(detections_path, load_config(config_path));
  io::write_text_file(out_path, dump(to_geojson(set)));
  std::cout << "clustered " << set.features.size() << " features -> " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

FeatureSet read_features(const std::string& path) {
  try {
    return from_geojson(parse_json_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

int cmd_evaluate(const std::string& features_path, const std::string& truth_path, double radius,
                 const std::string& detections_path, const std::string& out_path) {
  if (!(radius > 0.0)) throw BadInput("--radius must be positive");
  const FeatureSet features = read_features(features_path);
  sim::GroundTruth truth;
  try {
    truth = sim::truth_from_json(parse_json_file(truth_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, truth_path + ": " + e.what());
  }
  std::vector<SemanticDetection> dets;
  if (!detections_path.empty()) dets = read_detections(detections_path);

  const EvaluationReport report = evaluate(features, truth, radius, dets);
  const std::string table = report.to_table();
  io::write_text_file(out_path, dump(report.to_json()));
  fs::path table_path(out_path);
  table_path.replace_extension(".txt");
  io::write_text_file(table_path.string(), table);
  std::cout << table;
  return 0;
}

// ---------------------------------------------------------------- export

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << std::setprecision(10) << *v;
  return s.str();
}

std::string to_csv(const FeatureSet& set) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "kind,lat_deg,lon_deg,support,weight_sum,confidence,start_lat_deg,start_lon_deg,span_length_m,step_count,"
         "height_m,lane_count,node_id\n";
  for (const auto& f : set.features) {
    out << kind_name(f.kind) << ',' << f.location.lat_deg << ',' << f.location.lon_deg << ',' << f.support << ','
        << f.weight_sum << ',' << f.confidence << ','
        << fmt_opt(f.start_location ? std::optional(f.start_location->lat_deg) : std::nullopt) << ','
        << fmt_opt(f.start_location ? std::optional(f.start_location->lon_deg) : std::nullopt) << ','
        << fmt_opt(f.span_length_m) << ',' << (f.step_count ? std::to_string(*f.step_count) : "") << ','
        << fmt_opt(f.height_m) << ',' << (f.lane_count ? std::to_string(*f.lane_count) : "") << ','
        << f.node_id.value_or("") << '\n';
  }
  return out.str();
}

int cmd_export(const std::string& format, const std::string& features_path, const std::string& detections_path,
               const std::string& config_path, const std::string& out_path) {
  if (features_path.empty() == detections_path.empty()) {
    throw BadInput("export needs exactly one of --features or --detections");
  }
  const FeatureSet set = features_path.empty() ? cluster_file(detections_path, load_config(config_path))
                                               : read_features(features_path);
  const std::string text = format == "csv" ? to_csv(set) : dump(to_geojson(set));
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    io::write_text_file(out_path, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Map semantics from phone sensor traces"};
  app.require_subcommand(1);

  std::string scenario, out_dir, traces, network, config, detections, features, truth, out_file, format = "geojson";
  std::optional<std::uint64_t> seed;
  double radius = 20.0;

  auto* simulate = app.add_subcommand("simulate", "Generate traces and ground truth from a scenario");
  simulate->add_option("--scenario", scenario, "Scenario JSON file, or 'benchmark' for the canonical suite")->required();
  simulate->add_option("--seed", seed, "Random seed (overrides the scenario's own)");
  simulate->add_option("--out", out_dir, "Output directory")->required();

  auto* classify = app.add_subcommand("classify", "Run the full pipeline over a trace file");
  classify->add_option("--traces", traces, "Trace file (JSON Lines)")->required();
  classify->add_option("--network", network, "Road network JSON")->required();
  classify->add_option("--config", config, "Threshold config JSON (defaults when omitted)");
  classify->add_option("--out", out_dir, "Output directory")->required();

  auto* cluster = app.add_subcommand("cluster", "Cluster a detection log into map features");
  cluster->add_option("--detections", detections, "Detections (JSON Lines)")->required();
  cluster->add_option("--config", config, "Threshold config JSON");
  cluster->add_option("--out", out_file, "Output GeoJSON")->required();

  auto* eval = app.add_subcommand("evaluate", "Score features against simulator ground truth");
  eval->add_option("--features", features, "Features GeoJSON")->required();
  eval->add_option("--truth", truth, "Ground truth JSON")->required();
  eval->add_option("--radius", radius, "Match radius in metres")->capture_default_str();
  eval->add_option("--detections", detections, "Detections, for the location-error curve");
  eval->add_option("--out", out_file, "Report JSON (a .txt table is written beside it)")->required();

  auto* exp = app.add_subcommand("export", "Convert features to GeoJSON or CSV");
  exp->add_option("--format", format, "Output format")->check(CLI::IsMember({"geojson", "csv"}))->capture_default_str();
  exp->add_option("--features", features, "Features GeoJSON");
  exp->add_option("--detections", detections, "Detections (JSON Lines), clustered first");
  exp->add_option("--config", config, "Threshold config JSON, used with --detections");
  exp->add_option("--out", out_file, "Output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmd_simulate(scenario, seed, out_dir);
    if (*classify) return cmd_classify(traces, network, config, out_dir);
    if (*cluster) return cmd_cluster(detections, config, out_file);
    if (*eval) return cmd_evaluate(features, truth, radius, detections, out_file);
    if (*exp) return cmd_export(format, features, detections, config, out_file);
  } catch (const BadInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
