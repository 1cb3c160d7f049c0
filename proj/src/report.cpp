#include "gainlora/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "gainlora/error.hpp"
#include "gainlora/params.hpp"

namespace gainlora {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + path.string() + "'");
  return out;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string strategy_label(const StrategyConfig& s) {
  const std::string base(to_string(s.branch));
  return uses_gates(s.gating) ? "gain+" + base : base;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  require(ec == std::errc{}, ErrorKind::NonFinite, "cannot format value");
  return std::string(buf, end);
}

std::optional<MeanStd> mean_std(const std::vector<std::optional<double>>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& v : values) {
    if (!v) return std::nullopt;
    sum += *v;
  }
  MeanStd out;
  const double n = static_cast<double>(values.size());
  out.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (const auto& v : values) ss += (*v - out.mean) * (*v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

json summary_json(const ExperimentConfig& config, const std::vector<RunResult>& runs) {
  json seeds = json::array();
  std::vector<std::optional<double>> aps;
  std::vector<std::optional<double>> fts;
  for (const RunResult& r : runs) {
    seeds.push_back(json{{"seed", r.seed},
                         {"ap", optional_json(r.ap)},
                         {"ft", optional_json(r.ft)},
                         {"ap_trajectory", r.ap_trajectory},
                         {"trainable_params", r.trainable_params}});
    aps.push_back(r.ap);
    fts.push_back(r.ft);
  }
  auto stats = [](const std::vector<std::optional<double>>& v) {
    const auto s = mean_std(v);
    return s ? json{{"mean", s->mean}, {"std", s->std}} : json(nullptr);
  };
  return json{{"config", config_to_json(config)},
              {"strategy", strategy_label(config.strategy)},
              {"gating_mode", std::string(to_string(config.strategy.gating))},
              {"seeds", seeds},
              {"ap", stats(aps)},
              {"ft", stats(fts)}};
}

void write_bundle(const std::filesystem::path& dir, const ExperimentConfig& config,
                  const std::vector<RunResult>& runs) {
  std::filesystem::create_directories(dir);

  auto acc = open_out(dir / "accuracy_matrix.csv");
  acc << "seed,after_task,task,accuracy\n";
  for (const RunResult& r : runs) {
    const auto& rows = r.accuracy.rows();
    for (std::size_t j = 0; j < rows.size(); ++j) {
      for (std::size_t i = 0; i < rows[j].size(); ++i) {
        acc << r.seed << ',' << j + 1 << ',' << i + 1 << ',' << format_real(rows[j][i]) << '\n';
      }
    }
  }

  auto traj = open_out(dir / "trajectory.csv");
  traj << "seed,after_task,ap\n";
  for (const RunResult& r : runs) {
    for (std::size_t j = 0; j < r.ap_trajectory.size(); ++j) {
      traj << r.seed << ',' << j + 1 << ',' << format_real(r.ap_trajectory[j]) << '\n';
    }
  }

  auto gating = open_out(dir / "gating.csv");
  gating << "seed,gate,task,sample,value\n";
  for (const RunResult& r : runs) {
    for (const GateSamples& g : r.gating) {
      for (std::size_t s = 0; s < g.values.size(); ++s) {
        gating << r.seed << ',' << g.gate + 1 << ',' << g.task + 1 << ',' << s << ','
               << format_real(g.values[s]) << '\n';
      }
    }
  }

  auto params = open_out(dir / "params.csv");
  params << "arch,strategy,rank,trainable_params\n";
  if (!runs.empty()) {
    params << "toy," << strategy_label(config.strategy) << ',' << config.strategy.rank << ','
           << runs.front().trainable_params << '\n';
  }
  for (const std::string& name : arch_preset_names()) {
    const ArchSpec arch = arch_preset(name);
    for (const char* s : {"olora", "gain+olora", "inflora", "gain+inflora"}) {
      params << name << ',' << s << ',' << config.strategy.rank << ','
             << count_trainable_params(arch, parse_param_strategy(s), config.strategy.rank) << '\n';
    }
  }

  auto summary = open_out(dir / "summary.json");
  summary << summary_json(config, runs).dump(2) << '\n';
}

RunResult result_from_checkpoint(const Checkpoint& cp) {
  const ExperimentConfig config = config_from_json(cp.config);
  ExperimentInputs inputs = prepare_inputs(config, cp.seed);
  require(inputs.backbone.embedding() == cp.state.backbone.embedding(), ErrorKind::SchemaError,
          "checkpoint backbone does not match its config and seed");
  require(cp.state.tasks_learned == inputs.sequence.size(), ErrorKind::IncompleteMatrix,
          "checkpoint holds " + std::to_string(cp.state.tasks_learned) + " of " +
              std::to_string(inputs.sequence.size()) + " tasks");
  const ContinualLearner learner(inputs.strategy, cp.state);
  RunResult r;
  r.accuracy = cp.accuracy;
  r.gating = collect_gate_samples(learner, inputs.sequence);
  r.trainable_params = learner.trainable_parameter_count();
  r.config = inputs.strategy;
  r.seed = cp.seed;
  finalize_metrics(r);
  return r;
}

std::filesystem::path seed_dir(const std::filesystem::path& run_dir, std::uint64_t seed) {
  return run_dir / ("seed_" + std::to_string(seed));
}

std::vector<RunResult> results_from_run_dir(const std::filesystem::path& run_dir,
                                            ExperimentConfig* config_out) {
  require(std::filesystem::is_directory(run_dir), ErrorKind::Io,
          "run directory '" + run_dir.string() + "' not found");
  static const std::regex pattern(R"(seed_(\d+))");
  std::vector<std::pair<std::uint64_t, std::filesystem::path>> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, pattern)) {
      dirs.emplace_back(std::stoull(m[1]), entry.path());
    }
  }
  require(!dirs.empty(), ErrorKind::Io, "no seed_<n> directories under '" + run_dir.string() + "'");
  std::sort(dirs.begin(), dirs.end());

  std::vector<RunResult> runs;
  std::optional<json> config;
  for (const auto& [seed, dir] : dirs) {
    const auto path = latest_checkpoint(dir);
    require(!path.empty(), ErrorKind::Io, "no checkpoint in '" + dir.string() + "'");
    const Checkpoint cp = load_checkpoint(path);
    require(!config || *config == cp.config, ErrorKind::SchemaError,
            "seed directories were produced by different configs");
    config = cp.config;
    runs.push_back(result_from_checkpoint(cp));
  }
  if (config_out != nullptr) *config_out = config_from_json(*config);
  return runs;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace gainlora
