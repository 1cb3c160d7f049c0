#pragma once

// Output bundle: accuracy matrix, summary, gating distribution, AP
// trajectory and parameter table. All files are plain CSV/JSON.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gainlora/checkpoint.hpp"
#include "gainlora/config.hpp"
#include "gainlora/continual.hpp"

namespace gainlora {

struct SeedMetrics {
  std::uint64_t seed = 0;
  std::optional<double> ap;
  std::optional<double> ft;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

// nullopt if any value is missing.
std::optional<MeanStd> mean_std(const std::vector<std::optional<double>>& values);

// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

// Writes accuracy_matrix.csv, summary.json, gating.csv, trajectory.csv and
// params.csv into dir. Runs must share one configuration.
void write_bundle(const std::filesystem::path& dir, const ExperimentConfig& config,
                  const std::vector<RunResult>& runs);

nlohmann::json summary_json(const ExperimentConfig& config, const std::vector<RunResult>& runs);

// Rebuilds the full RunResult of one seed from its final checkpoint; task
// data is regenerated (or re-read) from the embedded config.
RunResult result_from_checkpoint(const Checkpoint& cp);

// Loads the last checkpoint of every seed_<s> directory under run_dir.
std::vector<RunResult> results_from_run_dir(const std::filesystem::path& run_dir,
                                            ExperimentConfig* config_out = nullptr);

std::filesystem::path seed_dir(const std::filesystem::path& run_dir, std::uint64_t seed);

// Minimal CSV reader for the emitted files (no quoting needed).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace gainlora
