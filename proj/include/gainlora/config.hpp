#pragma once

// Experiment configuration: TOML file + `--set key=value` overrides, all
// resolved into one validated ExperimentConfig.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gainlora/backbone.hpp"
#include "gainlora/continual.hpp"
#include "gainlora/dataset.hpp"

namespace gainlora {

enum class DataSource { Synthetic, Files };

struct ExperimentConfig {
  StrategyConfig strategy;  // seed is filled per run
  BackboneShape model;      // classes = tasks x classes_per_task
  SuiteOptions suite;
  DataSource source = DataSource::Synthetic;
  std::filesystem::path train_file;  // source = files: one file, task_id per sample
  std::filesystem::path test_file;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::filesystem::path out_dir = "runs";
  std::vector<GatingMode> variants{GatingMode::Gain, GatingMode::NoInit, GatingMode::NoUpdate,
                                   GatingMode::NoConstraints, GatingMode::FixedOne};

  void validate() const;
};

// Nested {section: {key: value}} form, identical for TOML input and JSON echo.
nlohmann::json config_to_json(const ExperimentConfig& config);
// Rejects unknown sections/keys and wrongly typed values with ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc);

// TOML text -> nested JSON; ParseError carries line and column.
nlohmann::json parse_toml(const std::string& text, const std::string& origin);
// "section.key=value"; value is read as a TOML value, falling back to a bare string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

// Everything a single seed needs: frozen backbone, tasks, strategy with seed.
struct ExperimentInputs {
  StrategyConfig strategy;
  Backbone backbone;
  TaskSequence sequence;
};

ExperimentInputs prepare_inputs(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace gainlora
