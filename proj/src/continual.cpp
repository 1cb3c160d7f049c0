#include "gainlora/continual.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <string>

#include "gainlora/error.hpp"
#include "gainlora/params.hpp"

namespace gainlora {

std::string_view to_string(BranchStrategy s) {
  switch (s) {
    case BranchStrategy::Seq: return "seq";
    case BranchStrategy::Inc: return "inc";
    case BranchStrategy::OLoRA: return "olora";
    case BranchStrategy::InfLoRA: return "inflora";
  }
  return "olora";
}

std::string_view to_string(GatingMode m) {
  switch (m) {
    case GatingMode::Gain: return "gain";
    case GatingMode::FixedOne: return "fixed_one";
    case GatingMode::NoInit: return "no_init";
    case GatingMode::NoUpdate: return "no_update";
    case GatingMode::NoConstraints: return "no_constraints";
  }
  return "gain";
}

BranchStrategy parse_branch_strategy(std::string_view s) {
  if (s == "seq") return BranchStrategy::Seq;
  if (s == "inc") return BranchStrategy::Inc;
  if (s == "olora") return BranchStrategy::OLoRA;
  if (s == "inflora") return BranchStrategy::InfLoRA;
  throw Error(ErrorKind::ConfigError, "unknown branch strategy '" + std::string(s) + "'");
}

GatingMode parse_gating_mode(std::string_view s) {
  if (s == "gain") return GatingMode::Gain;
  if (s == "fixed_one") return GatingMode::FixedOne;
  if (s == "no_init") return GatingMode::NoInit;
  if (s == "no_update") return GatingMode::NoUpdate;
  if (s == "no_constraints") return GatingMode::NoConstraints;
  throw Error(ErrorKind::ConfigError, "unknown gating mode '" + std::string(s) + "'");
}

GateConstraints compose(GateConstraints a, GateConstraints b) {
  return GateConstraints{a.init && b.init, a.update && b.update};
}

GateConstraints constraints_for(GatingMode mode) {
  switch (mode) {
    case GatingMode::Gain:
    case GatingMode::FixedOne: return {true, true};
    case GatingMode::NoInit: return {false, true};
    case GatingMode::NoUpdate: return {true, false};
    case GatingMode::NoConstraints:
      return compose(constraints_for(GatingMode::NoInit), constraints_for(GatingMode::NoUpdate));
  }
  return {};
}

bool uses_gates(GatingMode mode) { return mode != GatingMode::FixedOne; }

void StrategyConfig::validate() const {
  require(!(branch == BranchStrategy::Seq && uses_gates(gating)), ErrorKind::ConfigError,
          "strategy.branch = \"seq\" keeps a single branch and needs gating = \"fixed_one\"");
  require(!(constraints && !uses_gates(gating)), ErrorKind::ConfigError,
          "gate constraints need a gated mode");
  require(rank >= 1, ErrorKind::ConfigError, "rank must be positive");
  require(eps_th > 0.0 && eps_th <= 1.0, ErrorKind::ConfigError, "eps_th must lie in (0, 1]");
  require(lambda >= 0.0, ErrorKind::ConfigError, "lambda must be non-negative");
  require(collect_samples >= 1, ErrorKind::ConfigError, "collect_samples must be positive");
  require(batch_size >= 1, ErrorKind::ConfigError, "batch_size must be positive");
  require(gate_width >= 1, ErrorKind::ConfigError, "gate width must be positive");
  require(lora_std > 0.0 && gate_init_std > 0.0, ErrorKind::ConfigError,
          "initialization std must be positive");
  require(optim.lr > 0.0 && optim.beta1 >= 0.0 && optim.beta1 < 1.0 && optim.beta2 >= 0.0 &&
              optim.beta2 < 1.0 && optim.eps > 0.0 && optim.weight_decay >= 0.0,
          ErrorKind::ConfigError, "invalid AdamW hyperparameters");
}

GatingShape StrategyConfig::gating_shape(std::size_t embed_dim) const {
  GatingShape shape{embed_dim, {}};
  for (std::size_t l = 0; l < gate_layers; ++l) {
    shape.hidden.push_back(l % 2 == 0 ? gate_width : embed_dim);
  }
  return shape;
}

PooledDataset pool_dataset(const Backbone& model, const Dataset& data) {
  PooledDataset p;
  p.pooled = model.pool(data);
  p.task_id = data.task_id;
  for (const Sample& s : data.samples) {
    require(s.label < model.classes(), ErrorKind::SchemaError,
            "label " + std::to_string(s.label) + " >= class count");
    p.labels.push_back(s.label);
  }
  return p;
}

ContinualLearner::ContinualLearner(StrategyConfig config, Backbone backbone)
    : config_(std::move(config)),
      constraints_(config_.constraints.value_or(constraints_for(config_.gating))) {
  config_.validate();
  state_.backbone = std::move(backbone);
  const GatingShape shape = config_.gating_shape(state_.backbone.embed_dim());
  const std::vector<std::size_t> dims = shape.layer_inputs();
  state_.memory = SubspaceMemory(dims, config_.eps_th);
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    state_.grad_space.emplace_back(state_.backbone.layer(l).d_in());
  }
}

ContinualLearner::ContinualLearner(StrategyConfig config, LearnerState state)
    : config_(std::move(config)), state_(std::move(state)),
      constraints_(config_.constraints.value_or(constraints_for(config_.gating))) {
  config_.validate();
  require(state_.grad_space.size() == kAdaptedLayers, ErrorKind::SchemaError,
          "learner state lacks per-layer gradient subspaces");
  require(!uses_gates(config_.gating) || state_.gates.size() == state_.tasks_learned,
          ErrorKind::SchemaError, "gate count differs from tasks learned");
}

std::vector<std::vector<std::size_t>> ContinualLearner::batch_schedule(std::size_t n,
                                                                       std::size_t epoch) const {
  Rng rng = Rng::derive(config_.seed, kShuffleStream + state_.tasks_learned * 4096 + epoch);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += config_.batch_size) {
    const std::size_t stop = std::min(n, start + config_.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

std::vector<std::size_t> ContinualLearner::collection_rows(std::size_t n,
                                                           std::uint64_t stream) const {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (n <= config_.collect_samples) {
    return rows;
  }
  Rng rng = Rng::derive(config_.seed, stream);
  for (std::size_t i = 0; i < config_.collect_samples; ++i) {
    std::swap(rows[i], rows[i + rng.index(n - i)]);
  }
  rows.resize(config_.collect_samples);
  std::sort(rows.begin(), rows.end());
  return rows;
}

std::vector<std::optional<Var>> ContinualLearner::coefficient_vars(
    Tape& tape, Var pooled, std::vector<Var>* gate_params) const {
  const std::size_t branches = state_.backbone.branch_count();
  if (!uses_gates(config_.gating)) {
    return std::vector<std::optional<Var>>(branches);
  }
  require(state_.gates.size() == branches, ErrorKind::ShapeMismatch,
          "gate count " + std::to_string(state_.gates.size()) + " vs branch count " +
              std::to_string(branches));
  std::vector<std::optional<Var>> coeffs;
  const Mat x = tape.value(pooled);
  for (std::size_t i = 0; i < branches; ++i) {
    const GatingModule& g = state_.gates[i];
    if (gate_params == nullptr || g.frozen()) {
      coeffs.emplace_back(tape.input(g.forward_batch(x)));
      continue;
    }
    Var p = pooled;
    const auto& layers = g.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Var w = tape.param(layers[l]);
      gate_params->push_back(w);
      p = tape.matmul(p, tape.transpose(w));
      if (l + 1 < layers.size()) {
        p = tape.silu(p);
      }
    }
    coeffs.emplace_back(tape.gate(p, g.gate()));
  }
  return coeffs;
}

void ContinualLearner::begin_task(const PooledDataset& train) {
  require(!in_task_, ErrorKind::OrderViolation, "begin_task called twice");
  require(train.pooled.rows() > 0, ErrorKind::EmptyInput, "task has no training samples");
  require(train.pooled.cols() == state_.backbone.embed_dim(), ErrorKind::ShapeMismatch,
          "pooled width");
  const std::size_t task = state_.tasks_learned;
  Rng rng = Rng::derive(config_.seed, kTaskInitStream + task);
  Backbone& model = state_.backbone;

  std::array<Mat, kAdaptedLayers> new_inputs;
  if (config_.branch == BranchStrategy::InfLoRA) {
    const std::vector<std::size_t> rows =
        collection_rows(train.pooled.rows(), kCollectStream + 2 * task);
    new_inputs = adapted_inputs(gather_rows(train.pooled, rows));
  }

  if (config_.branch != BranchStrategy::Seq || model.branch_count() == 0) {
    for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
      LoraBranch& br = model.layer(l).expand(config_.rank, rng, config_.lora_std);
      if (config_.branch == BranchStrategy::InfLoRA) {
        br.b = inflora_design(transpose(new_inputs[l]), state_.grad_space[l], config_.rank);
        br.train_b = false;
      }
    }
  }

  if (uses_gates(config_.gating)) {
    GatingInitOptions opts;
    opts.shape = config_.gating_shape(model.embed_dim());
    opts.gate = constraints_.init ? config_.gate_fn : GateFn::Sigmoid;
    opts.init_std = config_.gate_init_std;
    opts.project_final = constraints_.init;
    const GatingModule* prev = state_.gates.empty() ? nullptr : &state_.gates.newest();
    GatingModule g = init_new_gating(prev, state_.memory, opts, rng);
    state_.gates.push(std::move(g));
  }

  branch_slots_.clear();
  gate_slots_.clear();
  step_losses_.clear();
  in_task_ = true;
}

double ContinualLearner::train_step(const PooledDataset& train, std::span<const std::size_t> batch) {
  require(in_task_, ErrorKind::OrderViolation, "train_step outside a task");
  require(!batch.empty(), ErrorKind::EmptyInput, "empty batch");
  Backbone& model = state_.backbone;

  Tape tape;
  const Var x = tape.input(gather_rows(train.pooled, batch));
  const BackboneVars vars = register_backbone(tape, model);
  std::vector<Var> gate_params;
  const auto coeffs = coefficient_vars(tape, x, &gate_params);
  const BackboneGraph graph = backbone_graph(tape, vars, x, coeffs);

  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  for (std::size_t i : batch) labels.push_back(train.labels[i]);
  Var loss = tape.softmax_cross_entropy(graph.logits, std::move(labels));

  const std::size_t t = model.branch_count();
  if (config_.branch == BranchStrategy::OLoRA && t >= 2 && config_.lambda > 0.0) {
    std::optional<Var> penalty;
    for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
      const Var current_t = tape.transpose(vars.branches[l][t - 1].b);
      for (std::size_t i = 0; i + 1 < t; ++i) {
        const Var term = tape.sum_squares(tape.matmul(vars.branches[l][i].b, current_t));
        penalty = penalty ? tape.add(*penalty, term) : term;
      }
    }
    loss = tape.add(loss, tape.scale(*penalty, config_.lambda));
  }
  tape.backward(loss);

  std::size_t slot = 0;
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    auto& branches = model.layer(l).mutable_branches();
    for (std::size_t i = 0; i < branches.size(); ++i) {
      LoraBranch& br = branches[i];
      for (auto [trainable, matrix, var] :
           {std::tuple{br.train_a, &br.a, vars.branches[l][i].a},
            std::tuple{br.train_b, &br.b, vars.branches[l][i].b}}) {
        if (!trainable) continue;
        if (branch_slots_.size() <= slot) branch_slots_.emplace_back();
        *matrix += branch_slots_[slot++].propose(config_.optim, *matrix, tape.grad(var));
      }
    }
  }

  if (!gate_params.empty()) {
    auto& layers = state_.gates.newest().mutable_layers();
    gate_slots_.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Mat proposed =
          gate_slots_[l].propose(config_.optim, layers[l], tape.grad(gate_params[l]));
      const Mat delta =
          constraints_.update ? constrain_update(proposed, state_.memory.layers[l]) : proposed;
      if (gate_hook_) {
        gate_hook_(l, proposed, delta, state_.memory.layers[l]);
      }
      layers[l] += delta;
    }
  }

  const double value = tape.scalar(loss);
  step_losses_.push_back(value);
  return value;
}

void ContinualLearner::end_task(const PooledDataset& train) {
  require(in_task_, ErrorKind::OrderViolation, "end_task outside a task");
  const std::size_t task = state_.tasks_learned;
  const std::vector<std::size_t> rows =
      collection_rows(train.pooled.rows(), kCollectStream + 2 * task + 1);
  const Mat subset = gather_rows(train.pooled, rows);

  if (uses_gates(config_.gating)) {
    const std::vector<Mat> traces = state_.gates.newest().trace_batch(subset);
    state_.memory.extend_all(traces);
  }
  if (config_.branch == BranchStrategy::InfLoRA) {
    const auto inputs = adapted_inputs(subset);
    for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
      state_.grad_space[l] = extend(state_.grad_space[l], transpose(inputs[l]), config_.eps_th);
    }
  }
  if (config_.branch != BranchStrategy::Seq) {
    for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
      state_.backbone.layer(l).freeze_all();
    }
  }
  state_.gates.freeze_all();
  ++state_.tasks_learned;
  in_task_ = false;
}

void ContinualLearner::learn_task(const Dataset& train) {
  const PooledDataset pooled = pool_dataset(state_.backbone, train);
  begin_task(pooled);
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    for (const auto& batch : batch_schedule(pooled.pooled.rows(), epoch)) {
      train_step(pooled, batch);
    }
  }
  end_task(pooled);
}

Mat ContinualLearner::logits(const Mat& pooled) const {
  Tape tape;
  const Var x = tape.input(pooled);
  const BackboneVars vars = register_backbone(tape, state_.backbone);
  const auto coeffs = coefficient_vars(tape, x, nullptr);
  return tape.value(backbone_graph(tape, vars, x, coeffs).logits);
}

std::array<Mat, kAdaptedLayers> ContinualLearner::adapted_inputs(const Mat& pooled) const {
  Tape tape;
  const Var x = tape.input(pooled);
  const BackboneVars vars = register_backbone(tape, state_.backbone);
  const auto coeffs = coefficient_vars(tape, x, nullptr);
  const BackboneGraph graph = backbone_graph(tape, vars, x, coeffs);
  std::array<Mat, kAdaptedLayers> out;
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    out[l] = tape.value(graph.layer_inputs[l]);
  }
  return out;
}

double ContinualLearner::accuracy(const Dataset& data) const {
  require(!data.empty(), ErrorKind::EmptyInput, "accuracy on an empty dataset");
  const Mat z = logits(state_.backbone.pool(data));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto row = z.row_span(i);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == data.samples[i].label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(z.rows());
}

std::vector<double> ContinualLearner::evaluate(const TaskSequence& sequence) const {
  require(state_.tasks_learned >= 1 && state_.tasks_learned <= sequence.size(),
          ErrorKind::OrderViolation, "evaluate needs at least one learned task");
  std::vector<double> row;
  for (std::size_t i = 0; i < state_.tasks_learned; ++i) {
    row.push_back(accuracy(sequence.tasks[i].test));
  }
  return row;
}

Mat ContinualLearner::gate_outputs(const Mat& pooled) const {
  Mat out(pooled.rows(), state_.gates.size());
  for (std::size_t g = 0; g < state_.gates.size(); ++g) {
    const Mat a = state_.gates[g].forward_batch(pooled);
    for (std::size_t i = 0; i < pooled.rows(); ++i) {
      out(i, g) = a(i, 0);
    }
  }
  return out;
}

std::size_t ContinualLearner::trainable_parameter_count() const {
  const Backbone& m = state_.backbone;
  ArchSpec arch;
  arch.name = "toy";
  arch.weights = {{m.layer(0).d_out(), m.layer(0).d_in(), 1}, {m.layer(1).d_out(), m.layer(1).d_in(), 1}};
  arch.gate = config_.gating_shape(m.embed_dim());
  ParamStrategy s;
  s.gain = uses_gates(config_.gating);
  s.update = config_.branch == BranchStrategy::InfLoRA ? BranchUpdate::AOnly : BranchUpdate::Full;
  return count_trainable_params(arch, s, config_.rank);
}

void finalize_metrics(RunResult& r) {
  r.ap_trajectory.clear();
  for (std::size_t j = 0; j < r.accuracy.rows_filled(); ++j) {
    r.ap_trajectory.push_back(row_average(r.accuracy, j));
  }
  r.ap = r.accuracy.complete() ? std::optional<double>(compute_ap(r.accuracy)) : std::nullopt;
  r.ft = r.accuracy.complete() && r.accuracy.tasks() >= 2
             ? std::optional<double>(compute_ft(r.accuracy))
             : std::nullopt;
}

std::vector<GateSamples> collect_gate_samples(const ContinualLearner& learner,
                                              const TaskSequence& sequence) {
  std::vector<GateSamples> out;
  const std::size_t learned = learner.state().tasks_learned;
  for (std::size_t task = 0; task < learned; ++task) {
    const Mat a = learner.gate_outputs(learner.state().backbone.pool(sequence.tasks[task].test));
    for (std::size_t g = 0; g < a.cols(); ++g) {
      out.push_back(GateSamples{g, task, a.col_vector(g)});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const GateSamples& x, const GateSamples& y) {
    return x.gate < y.gate;
  });
  return out;
}

RunResult resume_sequence(ContinualLearner learner, AccuracyMatrix matrix,
                          const TaskSequence& sequence, const RunHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  require(learner.state().tasks_learned == matrix.rows_filled(), ErrorKind::OrderViolation,
          "learner and accuracy matrix disagree on progress");
  for (std::size_t j = learner.state().tasks_learned; j < sequence.size(); ++j) {
    learner.learn_task(sequence.tasks[j].train);
    matrix.set_row(j, learner.evaluate(sequence));
    if (hooks.on_task_end) {
      hooks.on_task_end(learner, j, matrix);
    }
  }
  RunResult result;
  result.accuracy = std::move(matrix);
  result.gating = collect_gate_samples(learner, sequence);
  result.trainable_params = learner.trainable_parameter_count();
  result.config = learner.config();
  result.seed = learner.config().seed;
  finalize_metrics(result);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

RunResult run_sequence(const StrategyConfig& config, const TaskSequence& sequence,
                       const Backbone& initial, const RunHooks& hooks) {
  require(sequence.size() >= 1, ErrorKind::ConfigError, "empty task sequence");
  return resume_sequence(ContinualLearner(config, initial), AccuracyMatrix(sequence.size()),
                         sequence, hooks);
}

}  // namespace gainlora
