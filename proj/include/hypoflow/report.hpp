#pragma once

#include "hypoflow/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace hypoflow {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

// Flat experiment description; `probe` selects the dispatch target and `params`
// holds the probe-specific keys.
struct ExperimentConfig {
  std::string probe;
  std::string model;
  std::map<std::string, double> model_params;
  std::vector<double> x0;  // empty: the model's default start point
  double T = 1.0;
  double dt = 1e-3;
  long n_paths = 1000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: HYPOFLOW_THREADS, else 1
  Json params = Json::object();
  std::string out;  // empty: envelope to stdout, no sidecars

  int n_steps() const;
  Json to_json() const;
};

std::vector<std::string> probe_names();
// Allowed keys of `params` for a probe.
std::vector<std::string> probe_param_keys(const std::string& probe);

// Schema check only. Empty result means valid.
std::vector<std::string> validate_config(const Json& j);
// Throws ArgumentError carrying every diagnostic.
ExperimentConfig parse_config(const Json& j);

struct CsvTable {
  std::string name;  // sidecar suffix
  std::vector<std::string> header;
  std::vector<std::vector<Json>> rows;
  std::string render() const;
};

struct ReportEnvelope {
  Json config;
  Json payload;
  Json counts;  // paths requested, exploded, excluded
  std::vector<CsvTable> tables;
  std::vector<std::string> csv_paths;
  double wall_time = 0.0;
  Json to_json() const;
};

// Shortest round-trip decimal, identical to the JSON serialization.
std::string format_number(double v);

ReportEnvelope run(const ExperimentConfig& cfg);

// Writes `out` and sidecars `<stem>_<table>.csv` beside it; fills csv_paths.
void write_outputs(ReportEnvelope& env, const std::string& out);

// Runs, writes, and maps errors: 0 ok, 1 usage/validation, 2 hypothesis violation,
// 3 numerical failure. Messages go to `err`; the envelope goes to `out` when cfg.out is empty.
int run_and_report(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace hypoflow
