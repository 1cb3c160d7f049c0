#pragma once

// Versioned JSON checkpoints. Every real is stored as a JSON number printed
// with the shortest round-trip representation, so save/load is bit-exact.

#include <filesystem>

#include <json.hpp>

#include "gainlora/config.hpp"
#include "gainlora/continual.hpp"
#include "gainlora/metrics.hpp"

namespace gainlora {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "gainlora-checkpoint";

struct Checkpoint {
  nlohmann::json config;  // config_to_json of the producing run
  std::uint64_t seed = 0;
  LearnerState state;
  AccuracyMatrix accuracy;  // rows 0..tasks_learned-1

  bool operator==(const Checkpoint&) const = default;
};

nlohmann::json mat_to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& cp);
// SchemaError on missing fields, wrong version or inconsistent shapes.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path checkpoint_path(const std::filesystem::path& seed_dir, std::size_t task);
// Highest-numbered checkpoint in seed_dir, or empty if none.
std::filesystem::path latest_checkpoint(const std::filesystem::path& seed_dir);

}  // namespace gainlora
