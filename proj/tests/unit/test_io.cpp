#include <doctest.h>

#include <fstream>

#include "gainlora/checkpoint.hpp"
#include "gainlora/config.hpp"
#include "gainlora/error.hpp"
#include "gainlora/report.hpp"
#include "support.hpp"

using namespace gainlora;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gainlora_io_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("config defaults and parsing") {
  const ExperimentConfig d = config_from_json(nlohmann::json::object());
  CHECK(d.model.vocab == 256);
  CHECK(d.model.classes == 10);
  CHECK(d.strategy.eps_th == 0.99);
  CHECK(d.strategy.lambda == 0.5);
  CHECK(d.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(d.variants.size() == 5);

  const auto doc = parse_toml(R"(
[strategy]
branch = "inflora"
gating = "no_init"
eps_th = 0.95

[gating]
gate_fn = "abs_sine"

[optim]
lr = 2e-3
epochs = 3
)", "inline");
  const ExperimentConfig c = config_from_json(doc);
  CHECK(c.strategy.branch == BranchStrategy::InfLoRA);
  CHECK(c.strategy.gating == GatingMode::NoInit);
  CHECK(c.strategy.gate_fn == GateFn::AbsSine);
  CHECK(c.strategy.optim.lr == 2e-3);
  CHECK(c.strategy.epochs == 3);

  // Echo round-trips exactly.
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));
}

TEST_CASE("config errors") {
  const auto err = [](const std::string& text) {
    return kind_of([&] { config_from_json(parse_toml(text, "t")); });
  };
  CHECK(err("[model]\nvocabulary = 3\n") == ErrorKind::ConfigError);
  CHECK(err("[modle]\nvocab = 3\n") == ErrorKind::ConfigError);
  CHECK(err("[model]\nvocab = \"big\"\n") == ErrorKind::ConfigError);
  CHECK(err("[model]\nvocab = -1\n") == ErrorKind::ConfigError);
  CHECK(err("[model\n") == ErrorKind::ParseError);
  CHECK(err("[strategy]\nbranch = \"seq\"\n") == ErrorKind::ConfigError);
  CHECK(err("[strategy]\neps_th = 0.0\n") == ErrorKind::ConfigError);
  CHECK(err("[tasks]\ncount = 40\n") == ErrorKind::ConfigError);
  try {
    config_from_json(parse_toml("[optim]\nlearning_rate = 1.0\n", "t"));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("optim.learning_rate") != std::string::npos);
  }
}

TEST_CASE("overrides") {
  nlohmann::json doc = parse_toml("[optim]\nlr = 1e-3\n", "t");
  apply_override(doc, "optim.lr=0.01");
  apply_override(doc, "strategy.gating=fixed_one");
  apply_override(doc, "experiment.seeds=[4, 5]");
  apply_override(doc, "gating.gate_fn=\"clamp_abs\"");
  const ExperimentConfig c = config_from_json(doc);
  CHECK(c.strategy.optim.lr == 0.01);
  CHECK(c.strategy.gating == GatingMode::FixedOne);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.strategy.gate_fn == GateFn::ClampAbs);
  CHECK_THROWS_AS(apply_override(doc, "lr=1"), Error);
  CHECK_THROWS_AS(apply_override(doc, "optim.lr"), Error);
  apply_override(doc, "optim.momentum=0.5");
  CHECK_THROWS_AS(config_from_json(doc), Error);
}

TEST_CASE("load_config resolves dataset paths next to the file") {
  const fs::path dir = scratch("files");
  std::ofstream(dir / "train.jsonl") << "{\"tokens\": [1, 2], \"label\": 0, \"task_id\": 0}\n"
                                        "{\"tokens\": [3], \"label\": 1, \"task_id\": 0}\n"
                                        "{\"tokens\": [9, 9], \"label\": 2, \"task_id\": 1}\n"
                                        "{\"tokens\": [8], \"label\": 3, \"task_id\": 1}\n";
  std::ofstream(dir / "test.csv") << "tokens,label,task_id\n1 3,0,0\n9 8,3,1\n";
  std::ofstream(dir / "exp.toml") << "[tasks]\nsource = \"files\"\ncount = 2\n"
                                     "train_file = \"train.jsonl\"\ntest_file = \"test.csv\"\n"
                                     "[optim]\nepochs = 2\nbatch_size = 2\n";
  const ExperimentConfig c = load_config(dir / "exp.toml");
  CHECK(c.train_file == dir / "train.jsonl");
  const ExperimentInputs in = prepare_inputs(c, 1);
  REQUIRE(in.sequence.size() == 2);
  CHECK(in.sequence.tasks[1].train.samples.size() == 2);
  const RunResult r = run_sequence(in.strategy, in.sequence, in.backbone);
  CHECK(r.accuracy.complete());
  CHECK(kind_of([&] { load_config(dir / "absent.toml"); }) == ErrorKind::ConfigError);
}

TEST_CASE("checkpoint round trip is bit-exact and resumes identically") {
  const fs::path dir = scratch("resume");
  ExperimentConfig cfg = testing::small_config(3);
  cfg.strategy.branch = BranchStrategy::InfLoRA;
  const ExperimentInputs in = prepare_inputs(cfg, 2);
  const auto config_json = config_to_json(cfg);

  std::vector<Checkpoint> saved;
  const RunResult full = run_sequence(in.strategy, in.sequence, in.backbone,
      {[&](const ContinualLearner& l, std::size_t j, const AccuracyMatrix& m) {
        const Checkpoint cp{config_json, 2, l.state(), m};
        save_checkpoint(checkpoint_path(dir, j + 1), cp);
        saved.push_back(cp);
      }});

  CHECK(latest_checkpoint(dir) == checkpoint_path(dir, 3));
  for (std::size_t j = 0; j < saved.size(); ++j) {
    CHECK(load_checkpoint(checkpoint_path(dir, j + 1)) == saved[j]);
  }

  Checkpoint mid = load_checkpoint(checkpoint_path(dir, 1));
  const RunResult resumed = resume_sequence(ContinualLearner(in.strategy, std::move(mid.state)),
                                            std::move(mid.accuracy), in.sequence);
  CHECK(resumed.accuracy == full.accuracy);
  CHECK(resumed.ap == full.ap);
  REQUIRE(resumed.gating.size() == full.gating.size());
  for (std::size_t i = 0; i < full.gating.size(); ++i) CHECK(resumed.gating[i].values == full.gating[i].values);

  // Report re-derivation from the final checkpoint.
  const RunResult rebuilt = result_from_checkpoint(load_checkpoint(checkpoint_path(dir, 3)));
  CHECK(rebuilt.accuracy == full.accuracy);
  CHECK(rebuilt.ap_trajectory == full.ap_trajectory);
  CHECK(rebuilt.trainable_params == full.trainable_params);
  for (std::size_t i = 0; i < full.gating.size(); ++i) CHECK(rebuilt.gating[i].values == full.gating[i].values);
}

TEST_CASE("checkpoint validation") {
  const fs::path dir = scratch("bad");
  std::ofstream(dir / "a.json") << "{\"format\": \"other\"}";
  CHECK(kind_of([&] { load_checkpoint(dir / "a.json"); }) == ErrorKind::SchemaError);
  std::ofstream(dir / "b.json") << "{not json";
  CHECK(kind_of([&] { load_checkpoint(dir / "b.json"); }) == ErrorKind::ParseError);
  CHECK(kind_of([&] { mat_from_json(nlohmann::json{{"rows", 2}, {"cols", 2}, {"data", {1.0}}}); }) ==
        ErrorKind::SchemaError);
  const Mat odd = Mat::from_rows({{0.1, 1.0 / 3.0}, {-2.5e-300, 6.02214076e23}});
  CHECK(mat_from_json(nlohmann::json::parse(mat_to_json(odd).dump())) == odd);
  CHECK(latest_checkpoint(dir / "missing").empty());
}

TEST_CASE("bundle files parse back") {
  const fs::path dir = scratch("bundle");
  ExperimentConfig cfg = testing::small_config(2);
  cfg.seeds = {1, 2};
  std::vector<RunResult> runs;
  for (std::uint64_t s : cfg.seeds) {
    const ExperimentInputs in = prepare_inputs(cfg, s);
    runs.push_back(run_sequence(in.strategy, in.sequence, in.backbone));
  }
  write_bundle(dir, cfg, runs);

  const auto acc = read_csv(dir / "accuracy_matrix.csv");
  CHECK(acc.front() == std::vector<std::string>{"seed", "after_task", "task", "accuracy"});
  CHECK(acc.size() == 1 + 2 * 3);
  CHECK(std::stod(acc[1][3]) == runs[0].accuracy.at(0, 0));

  const auto gating = read_csv(dir / "gating.csv");
  CHECK(gating.front().size() == 5);
  std::size_t samples = 0;
  for (const RunResult& r : runs)
    for (const GateSamples& g : r.gating) samples += g.values.size();
  CHECK(gating.size() == 1 + samples);
  for (std::size_t i = 1; i < gating.size(); ++i) {
    const double v = std::stod(gating[i][4]);
    CHECK((v >= 0.0 && v <= 1.0));
  }

  const auto traj = read_csv(dir / "trajectory.csv");
  CHECK(traj.size() == 1 + 2 * 2);
  const auto params = read_csv(dir / "params.csv");
  CHECK(params.size() == 1 + 1 + 20);
  CHECK(params[2] == std::vector<std::string>{"t5-large", "olora", "4", "1179648"});

  std::ifstream in(dir / "summary.json");
  const auto summary = nlohmann::json::parse(in);
  CHECK(summary["seeds"].size() == 2);
  CHECK(summary["ap"]["mean"].get<double>() == doctest::Approx((*runs[0].ap + *runs[1].ap) / 2));
  CHECK(summary["config"] == config_to_json(cfg));
  CHECK(format_real(0.1) == "0.1");
  CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
}
