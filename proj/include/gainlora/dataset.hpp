#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gainlora/mat.hpp"
#include "gainlora/rng.hpp"

namespace gainlora {

struct Sample {
  std::vector<std::size_t> tokens;
  std::size_t label = 0;
  std::size_t task_id = 0;

  bool operator==(const Sample&) const = default;
};

// Task identity is carried for bookkeeping only; inference never sees it.
struct Dataset {
  std::size_t task_id = 0;
  std::vector<Sample> samples;

  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
  bool operator==(const Dataset&) const = default;
};

// Tokens in [begin, end).
struct VocabWindow {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
  [[nodiscard]] bool intersects(const VocabWindow& o) const noexcept {
    return begin < o.end && o.begin < end;
  }
};

// Thresholds on a random projection of the pooled embedding; class k covers
// scores in [thresholds[k-1], thresholds[k]).
struct LinearTeacher {
  std::vector<double> direction;
  std::vector<double> thresholds;  // n_classes - 1, ascending

  [[nodiscard]] std::size_t classify(std::span<const double> pooled) const;
};

struct TaskGenOptions {
  VocabWindow window;
  std::size_t n_classes = 2;
  std::size_t class_offset = 0;  // global id of this task's first class
  std::size_t n_train = 500;
  std::size_t n_test = 200;
  double noise = 0.0;
  std::size_t min_len = 8;
  std::size_t max_len = 16;
};

struct TaskData {
  Dataset train;
  Dataset test;
  LinearTeacher teacher;
};

// Sequences drawn uniformly from the task window, labelled by a random
// linear teacher with per-split class quotas (balanced within +-1). A noise
// fraction of each split has its labels permuted among itself.
// Throws WindowOverlap if the window meets one of `taken` and overlap is not
// allowed.
TaskData generate_task(Rng& rng, std::size_t task_id, const Mat& embedding,
                       const TaskGenOptions& options, std::span<const VocabWindow> taken = {},
                       bool allow_overlap = false);

struct TaskSequence {
  std::vector<TaskData> tasks;
  std::size_t n_classes = 0;  // size of the shared label space

  [[nodiscard]] std::size_t size() const noexcept { return tasks.size(); }
};

struct SuiteOptions {
  std::size_t tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t window = 8;
  double overlap = 0.0;  // fraction of each window shared with the next
  std::size_t n_train = 500;
  std::size_t n_test = 200;
  double noise = 0.0;
  std::size_t min_len = 8;
  std::size_t max_len = 16;
};

std::vector<VocabWindow> suite_windows(const SuiteOptions& options, std::size_t vocab);

// Task t uses Rng::derive(seed, kDataStream + t).
inline constexpr std::uint64_t kDataStream = 0x10000;
TaskSequence generate_suite(const SuiteOptions& options, const Mat& embedding, std::uint64_t seed);

enum class DataFormat { Jsonl, Csv };
DataFormat format_from_path(const std::filesystem::path& path);

struct IngestLimits {
  std::size_t vocab = 0;
  std::size_t classes = 0;
};

// File order is preserved. Dataset::task_id is the first sample's id.
// `warnings` receives non-fatal notes such as an empty file.
Dataset ingest_dataset(const std::filesystem::path& path, DataFormat format,
                       const IngestLimits& limits, std::vector<std::string>* warnings = nullptr);

// Groups samples by task_id, ascending.
std::vector<Dataset> split_by_task(const Dataset& all);

}  // namespace gainlora
