// gainlora: run, ablate, params and report subcommands.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gainlora/checkpoint.hpp"
#include "gainlora/config.hpp"
#include "gainlora/continual.hpp"
#include "gainlora/error.hpp"
#include "gainlora/params.hpp"
#include "gainlora/report.hpp"

namespace fs = std::filesystem;
using namespace gainlora;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::SchemaError:
    case ErrorKind::ConfigError:
    case ErrorKind::UnknownPreset:
    case ErrorKind::WindowOverlap:
    case ErrorKind::IdOutOfRange:
    case ErrorKind::EmptyInput:
    case ErrorKind::Io:
      return kExitConfig;
    default:
      return kExitNumeric;
  }
}

struct CommonArgs {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::vector<std::string> overrides;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config, "TOML experiment config")->required();
  cmd->add_option("--seed", args.seeds, "seed(s) to run; replaces experiment.seeds");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--set", args.overrides, "override, e.g. --set optim.lr=0.002");
  cmd->add_flag("--resume", args.resume, "continue each seed from its latest checkpoint");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig config = load_config(args.config, args.overrides);
  if (!args.seeds.empty()) config.seeds = args.seeds;
  if (!args.out.empty()) {
    config.out_dir = args.out;
  } else if (const char* root = std::getenv("GAINLORA_OUT_ROOT");
             root != nullptr && *root != '\0' && config.out_dir.is_relative()) {
    config.out_dir = fs::path(root) / config.out_dir;
  }
  config.validate();
  return config;
}

RunResult run_seed(const ExperimentConfig& config, const fs::path& out, std::uint64_t seed,
                   bool resume) {
  ExperimentInputs inputs = prepare_inputs(config, seed);
  const fs::path dir = seed_dir(out, seed);
  const nlohmann::json config_json = config_to_json(config);

  RunHooks hooks;
  hooks.on_task_end = [&](const ContinualLearner& learner, std::size_t j,
                          const AccuracyMatrix& matrix) {
    save_checkpoint(checkpoint_path(dir, j + 1), Checkpoint{config_json, seed, learner.state(), matrix});
  };

  const fs::path latest = resume ? latest_checkpoint(dir) : fs::path{};
  if (!latest.empty()) {
    Checkpoint cp = load_checkpoint(latest);
    require(cp.config == config_json && cp.seed == seed, ErrorKind::ConfigError,
            "checkpoint " + latest.string() + " was written by a different config or seed");
    return resume_sequence(ContinualLearner(inputs.strategy, std::move(cp.state)),
                           std::move(cp.accuracy), inputs.sequence, hooks);
  }
  if (fs::is_directory(dir)) {
    for (fs::path p; !(p = latest_checkpoint(dir)).empty();) fs::remove(p);
  }
  return run_sequence(inputs.strategy, inputs.sequence, inputs.backbone, hooks);
}

// Seeds are independent; each writes only to its own directory.
std::vector<RunResult> run_all(const ExperimentConfig& config, const fs::path& out, bool resume) {
  const auto n = static_cast<std::ptrdiff_t>(config.seeds.size());
  std::vector<RunResult> results(config.seeds.size());
  std::exception_ptr failure;
  std::mutex lock;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      results[i] = run_seed(config, out, config.seeds[i], resume);
    } catch (...) {
      const std::lock_guard<std::mutex> guard(lock);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  write_bundle(out, config, results);
  return results;
}

std::string show(const std::optional<double>& v) {
  if (!v) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

void print_runs(const std::string& label, const std::vector<RunResult>& runs) {
  std::vector<std::optional<double>> aps;
  std::vector<std::optional<double>> fts;
  for (const RunResult& r : runs) {
    std::cout << label << " seed " << r.seed << ": AP " << show(r.ap) << " FT " << show(r.ft)
              << '\n';
    aps.push_back(r.ap);
    fts.push_back(r.ft);
  }
  const auto ap = mean_std(aps);
  const auto ft = mean_std(fts);
  std::cout << label << " mean: AP " << show(ap ? std::optional(ap->mean) : std::nullopt)
            << " FT " << show(ft ? std::optional(ft->mean) : std::nullopt) << '\n';
}

int cmd_run(const CommonArgs& args) {
  const ExperimentConfig config = resolve_config(args);
  const auto runs = run_all(config, config.out_dir, args.resume);
  print_runs(std::string(to_string(config.strategy.gating)), runs);
  std::cout << "bundle written to " << config.out_dir.string() << '\n';
  return kExitOk;
}

int cmd_ablate(const CommonArgs& args, const std::vector<std::string>& variant_names) {
  ExperimentConfig base = resolve_config(args);
  if (!variant_names.empty()) {
    base.variants.clear();
    for (const auto& v : variant_names) base.variants.push_back(parse_gating_mode(v));
  }
  std::ostringstream table;
  table << "variant,ap_mean,ap_std,ft_mean,ft_std\n";
  auto cell = [](const std::optional<MeanStd>& s, bool mean) {
    return s ? format_real(mean ? s->mean : s->std) : std::string();
  };
  for (GatingMode mode : base.variants) {
    ExperimentConfig config = base;
    config.strategy.gating = mode;
    config.validate();
    const std::string name(to_string(mode));
    const auto runs = run_all(config, base.out_dir / name, args.resume);
    print_runs(name, runs);
    std::vector<std::optional<double>> aps;
    std::vector<std::optional<double>> fts;
    for (const RunResult& r : runs) {
      aps.push_back(r.ap);
      fts.push_back(r.ft);
    }
    const auto ap = mean_std(aps);
    const auto ft = mean_std(fts);
    table << name << ',' << cell(ap, true) << ',' << cell(ap, false) << ',' << cell(ft, true)
          << ',' << cell(ft, false) << '\n';
  }
  fs::create_directories(base.out_dir);
  std::ofstream out(base.out_dir / "ablation.csv", std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write ablation.csv");
  out << table.str();
  std::cout << table.str();
  return kExitOk;
}

int cmd_params(const std::string& preset, const std::string& strategy, std::size_t rank, bool all) {
  if (all) {
    std::cout << "arch,strategy,rank,trainable_params\n";
    for (const std::string& name : arch_preset_names()) {
      for (const char* s : {"olora", "gain+olora", "inflora", "gain+inflora"}) {
        std::cout << name << ',' << s << ',' << rank << ','
                  << count_trainable_params(arch_preset(name), parse_param_strategy(s), rank) << '\n';
      }
    }
    return kExitOk;
  }
  require(!preset.empty() && !strategy.empty(), ErrorKind::ConfigError,
          "params needs PRESET and STRATEGY (or --all)");
  const std::uint64_t count =
      count_trainable_params(arch_preset(preset), parse_param_strategy(strategy), rank);
  std::cout << count << '\n'
            << nlohmann::json{{"preset", preset},
                              {"strategy", strategy},
                              {"rank", rank},
                              {"trainable_params", count}}
                   .dump()
            << '\n';
  return kExitOk;
}

int cmd_report(const std::string& run_dir, const std::string& out) {
  ExperimentConfig config;
  const auto runs = results_from_run_dir(run_dir, &config);
  const fs::path target = out.empty() ? fs::path(run_dir) : fs::path(out);
  write_bundle(target, config, runs);
  print_runs(std::string(to_string(config.strategy.gating)), runs);
  std::cout << "bundle written to " << target.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GainLoRA desk-scale continual learning"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "train every seed and write the report bundle");
  add_common(run, run_args);

  CommonArgs ablate_args;
  std::vector<std::string> variants;
  auto* ablate = app.add_subcommand("ablate", "run each gating variant and compare AP/FT");
  add_common(ablate, ablate_args);
  ablate->add_option("--variants", variants, "gating modes to compare")->delimiter(',');

  std::string preset;
  std::string strategy;
  std::size_t rank = 4;
  bool all = false;
  auto* params = app.add_subcommand("params", "count trainable parameters per task");
  params->add_option("preset", preset, "t5-large, t5-xl, llama-2-7b, llama-2-13b, llama-3-8b");
  params->add_option("strategy", strategy, "olora, inflora, gain+olora, gain+inflora, inc, seq");
  params->add_option("-r,--rank", rank, "LoRA rank")->check(CLI::PositiveNumber);
  params->add_flag("--all", all, "print the table for every preset");

  std::string report_dir;
  std::string report_out;
  auto* report = app.add_subcommand("report", "rebuild the bundle from checkpoints");
  report->add_option("run_dir", report_dir, "directory holding seed_<n>/ checkpoints")->required();
  report->add_option("--out", report_out, "write the bundle here instead of run_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*ablate) return cmd_ablate(ablate_args, variants);
    if (*params) return cmd_params(preset, strategy, rank, all);
    if (*report) return cmd_report(report_dir, report_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}
