#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "smflow/types.hpp"

namespace smflow {

// Raised for malformed or inconsistent experiment configurations.
class ConfigError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kMinDtDivisor = 10;

std::vector<std::string> available_commands();
std::vector<std::string> available_models();

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 0;
  int workers = 1;
  nlohmann::json document;
};

// Validates the whole document (every field the command reads) and throws
// ConfigError naming the offending key.  A non-empty `command` overrides the
// document's "command" entry.
ExperimentConfig parse_config(const nlohmann::json& document, const std::string& command = "");
ExperimentConfig parse_config_file(const std::filesystem::path& path, const std::string& command = "");

struct ExperimentResult {
  nlohmann::json summary;
  std::string curve_csv;
  std::string trajectory_csv;  // empty unless the command records trajectories
  bool passed = true;
};

// Results depend only on the document and the seed, never on the worker count.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Writes summary.json, curve.csv and, when present, trajectory.csv.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& directory);

}  // namespace smflow
