#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqpm/config.hpp"
#include "seqpm/parallel.hpp"

namespace seqpm {

/// One enabled invariant check and its verdict.
struct Check {
  std::string name;
  bool passed{false};
  double value{0.0};
  double threshold{0.0};
  std::string detail;
};

/// Named table for plotting; every row has one value per column.
struct Curve {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentRecord {
  ExperimentConfig config;
  std::string config_hash;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  std::vector<Check> checks;
  std::map<std::string, Curve> curves;
  std::vector<nlohmann::ordered_json> stream;  // JSON-lines records

  // Run metadata, kept out of the summary so reruns compare byte for byte.
  double wall_clock_seconds{0.0};
  unsigned workers{1};
  std::vector<std::string> warnings;
  nlohmann::ordered_json cache_stats = nlohmann::ordered_json::object();

  bool passed() const;
};

using LogSink = std::function<void(const std::string&)>;

/// Dispatches to the owning module. Numeric aborts (GridBreakdown and the
/// like) propagate unchanged.
ExperimentRecord run_experiment(const ExperimentConfig& config, Parallelism par = {},
                                const LogSink& log = {});

/// Deterministic summary: schema, versions, config, results, verdicts.
nlohmann::ordered_json summary_json(const ExperimentRecord& record);

/// Wall clock, worker count, cache statistics and warnings.
nlohmann::ordered_json run_metadata(const ExperimentRecord& record);

/// Writes summary.json, records.jsonl and run.json into dir.
void write_outputs(const ExperimentRecord& record, const std::filesystem::path& dir);

std::vector<std::string> curve_names(const ExperimentRecord& record);

/// CSV with a header row and 17 significant digits. Throws DomainError for an
/// unknown curve, listing the available ones.
std::string emit_plotdata(const ExperimentRecord& record, const std::string& curve);

}  // namespace seqpm
