#pragma once

// Task-by-task training loop: expand a LoRA branch, initialize a new gate
// under the orthogonality constraints, train with projected gate updates,
// then grow the input-subspace memory.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gainlora/activation.hpp"
#include "gainlora/backbone.hpp"
#include "gainlora/dataset.hpp"
#include "gainlora/gating.hpp"
#include "gainlora/metrics.hpp"
#include "gainlora/optim.hpp"
#include "gainlora/subspace.hpp"

namespace gainlora {

enum class BranchStrategy { Seq, Inc, OLoRA, InfLoRA };
enum class GatingMode { Gain, FixedOne, NoInit, NoUpdate, NoConstraints };

std::string_view to_string(BranchStrategy s);
std::string_view to_string(GatingMode m);
BranchStrategy parse_branch_strategy(std::string_view s);
GatingMode parse_gating_mode(std::string_view s);

struct GateConstraints {
  bool init = true;    // f(0) = 0 and final layer projected off the memory
  bool update = true;  // every gate update projected off the memory

  bool operator==(const GateConstraints&) const = default;
};

// Meaningful only for gated modes.
GateConstraints constraints_for(GatingMode mode);
// Drops whatever either operand drops.
GateConstraints compose(GateConstraints a, GateConstraints b);
bool uses_gates(GatingMode mode);

struct StrategyConfig {
  BranchStrategy branch = BranchStrategy::OLoRA;
  GatingMode gating = GatingMode::Gain;
  double lambda = 0.5;
  double eps_th = kDefaultEpsTh;
  std::size_t collect_samples = kDefaultCollectSamples;
  std::size_t rank = 4;
  double lora_std = 0.02;
  GateFn gate_fn = GateFn::AbsSigmoid;
  std::size_t gate_width = 32;
  std::size_t gate_layers = 2;  // L
  double gate_init_std = 0.02;
  AdamWOptions optim;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  // Replaces constraints_for(gating) when set; gated modes only.
  std::optional<GateConstraints> constraints;

  // Throws ConfigError on invalid combinations (seq with a gated mode, ...).
  void validate() const;
  // Hidden widths alternate gate_width, embed_dim: w, d, w, d, ...
  [[nodiscard]] GatingShape gating_shape(std::size_t embed_dim) const;
};

struct LearnerState {
  Backbone backbone;
  GatingBank gates;
  SubspaceMemory memory;                  // gate layer inputs
  std::vector<SubspaceBasis> grad_space;  // adapted layer inputs (InfLoRA)
  std::size_t tasks_learned = 0;

  bool operator==(const LearnerState&) const = default;
};

struct PooledDataset {
  Mat pooled;  // n x d
  std::vector<std::size_t> labels;
  std::size_t task_id = 0;
};

PooledDataset pool_dataset(const Backbone& model, const Dataset& data);

// RNG stream ids derived from the run seed.
inline constexpr std::uint64_t kBackboneStream = 0x1;
inline constexpr std::uint64_t kTaskInitStream = 0x20000;
inline constexpr std::uint64_t kShuffleStream = 0x30000;
inline constexpr std::uint64_t kCollectStream = 0x40000;

class ContinualLearner {
 public:
  ContinualLearner(StrategyConfig config, Backbone backbone);
  ContinualLearner(StrategyConfig config, LearnerState state);

  // begin_task + epochs of train_step over the shuffled schedule + end_task.
  void learn_task(const Dataset& train);

  void begin_task(const PooledDataset& train);
  // One AdamW step on the given rows of train; returns the loss.
  double train_step(const PooledDataset& train, std::span<const std::size_t> batch);
  void end_task(const PooledDataset& train);

  // Mini-batches for (current task, epoch): a seeded permutation cut into
  // batch_size chunks.
  [[nodiscard]] std::vector<std::vector<std::size_t>> batch_schedule(std::size_t n,
                                                                     std::size_t epoch) const;

  // Class scores for pooled inputs with every gate active.
  [[nodiscard]] Mat logits(const Mat& pooled) const;
  // Percentage of correct argmax predictions.
  [[nodiscard]] double accuracy(const Dataset& data) const;
  // A_{j,i} for i <= j where j = tasks_learned - 1.
  [[nodiscard]] std::vector<double> evaluate(const TaskSequence& sequence) const;
  // n x t matrix of gate outputs (column i is g_{i+1}); empty without gates.
  [[nodiscard]] Mat gate_outputs(const Mat& pooled) const;
  // Row inputs of each adapted layer (n x d_in) under the current model.
  [[nodiscard]] std::array<Mat, kAdaptedLayers> adapted_inputs(const Mat& pooled) const;

  [[nodiscard]] const LearnerState& state() const noexcept { return state_; }
  [[nodiscard]] const StrategyConfig& config() const noexcept { return config_; }
  [[nodiscard]] const std::vector<double>& step_losses() const noexcept { return step_losses_; }
  [[nodiscard]] std::size_t trainable_parameter_count() const;

  // Called for each gate layer update with the optimizer's proposal and the
  // delta actually applied (equal when updates are unconstrained).
  using GateUpdateHook = std::function<void(std::size_t layer, const Mat& proposed,
                                            const Mat& applied, const SubspaceBasis& basis)>;
  void set_gate_update_hook(GateUpdateHook hook) { gate_hook_ = std::move(hook); }

 private:
  std::vector<std::optional<Var>> coefficient_vars(Tape& tape, Var pooled,
                                                   std::vector<Var>* gate_params) const;
  std::vector<std::size_t> collection_rows(std::size_t n, std::uint64_t stream) const;

  StrategyConfig config_;
  LearnerState state_;
  GateConstraints constraints_;
  bool in_task_ = false;
  std::vector<AdamWSlot> branch_slots_;
  std::vector<AdamWSlot> gate_slots_;
  std::vector<double> step_losses_;
  GateUpdateHook gate_hook_;
};

struct GateSamples {
  std::size_t gate = 0;  // 0-based gate index
  std::size_t task = 0;  // 0-based task whose test set was scored
  std::vector<double> values;
};

struct RunResult {
  AccuracyMatrix accuracy;
  std::optional<double> ap;
  std::optional<double> ft;  // null for a single task
  std::vector<double> ap_trajectory;
  std::vector<GateSamples> gating;
  std::uint64_t trainable_params = 0;
  double wall_seconds = 0.0;
  StrategyConfig config;
  std::uint64_t seed = 0;
};

// Fills the derived fields (AP, FT, trajectory) from the matrix.
void finalize_metrics(RunResult& result);

// Gate outputs of every gate on every task's test inputs.
std::vector<GateSamples> collect_gate_samples(const ContinualLearner& learner,
                                              const TaskSequence& sequence);

struct RunHooks {
  // After task j (0-based) is learned and evaluated.
  std::function<void(const ContinualLearner&, std::size_t, const AccuracyMatrix&)> on_task_end;
};

RunResult run_sequence(const StrategyConfig& config, const TaskSequence& sequence,
                       const Backbone& initial, const RunHooks& hooks = {});

// Continues from a learner that has already learned the first
// `matrix.rows_filled()` tasks.
RunResult resume_sequence(ContinualLearner learner, AccuracyMatrix matrix,
                          const TaskSequence& sequence, const RunHooks& hooks = {});

}  // namespace gainlora
