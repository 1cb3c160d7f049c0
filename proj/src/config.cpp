#include "gainlora/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "gainlora/error.hpp"

namespace gainlora {

using nlohmann::json;

namespace {

[[noreturn]] void bad_type(const std::string& key, const char* expected) {
  throw Error(ErrorKind::ConfigError, "key '" + key + "' expects " + expected);
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) bad_type(key, "a non-negative integer");
  return v.get<std::size_t>();
}

double as_real(const json& v, const std::string& key) {
  if (!v.is_number()) bad_type(key, "a number");
  return v.get<double>();
}

std::string as_text(const json& v, const std::string& key) {
  if (!v.is_string()) bad_type(key, "a string");
  return v.get<std::string>();
}

template <typename Parse>
auto as_enum(const json& v, const std::string& key, Parse parse) {
  const std::string s = as_text(v, key);
  try {
    return parse(s);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, "key '" + key + "': " + e.what());
  }
}

struct Field {
  const char* section;
  const char* key;
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&, const std::string&)> set;
};

template <typename T>
Field count_field(const char* s, const char* k, T ExperimentConfig::*outer, std::size_t T::*member) {
  return {s, k, [=](const ExperimentConfig& c) { return json((c.*outer).*member); },
          [=](ExperimentConfig& c, const json& v, const std::string& name) {
            (c.*outer).*member = as_count(v, name);
          }};
}

template <typename T>
Field real_field(const char* s, const char* k, T ExperimentConfig::*outer, double T::*member) {
  return {s, k, [=](const ExperimentConfig& c) { return json((c.*outer).*member); },
          [=](ExperimentConfig& c, const json& v, const std::string& name) {
            (c.*outer).*member = as_real(v, name);
          }};
}

const std::vector<Field>& fields() {
  using E = ExperimentConfig;
  static const std::vector<Field> table = {
      {"experiment", "seeds",
       [](const E& c) { return json(c.seeds); },
       [](E& c, const json& v, const std::string& name) {
         if (!v.is_array()) bad_type(name, "an array of integers");
         c.seeds.clear();
         for (const json& s : v) c.seeds.push_back(as_count(s, name));
       }},
      {"experiment", "out_dir", [](const E& c) { return json(c.out_dir.string()); },
       [](E& c, const json& v, const std::string& name) { c.out_dir = as_text(v, name); }},
      {"experiment", "variants",
       [](const E& c) {
         json out = json::array();
         for (GatingMode m : c.variants) out.push_back(std::string(to_string(m)));
         return out;
       },
       [](E& c, const json& v, const std::string& name) {
         if (!v.is_array()) bad_type(name, "an array of gating modes");
         c.variants.clear();
         for (const json& s : v) c.variants.push_back(as_enum(s, name, parse_gating_mode));
       }},

      count_field("model", "vocab", &E::model, &BackboneShape::vocab),
      count_field("model", "embed_dim", &E::model, &BackboneShape::embed_dim),
      count_field("model", "hidden", &E::model, &BackboneShape::hidden),
      real_field("model", "embed_std", &E::model, &BackboneShape::embed_std),

      {"tasks", "source",
       [](const E& c) { return json(c.source == DataSource::Files ? "files" : "synthetic"); },
       [](E& c, const json& v, const std::string& name) {
         const std::string s = as_text(v, name);
         if (s == "synthetic") c.source = DataSource::Synthetic;
         else if (s == "files") c.source = DataSource::Files;
         else throw Error(ErrorKind::ConfigError, "key '" + name + "' must be \"synthetic\" or \"files\"");
       }},
      count_field("tasks", "count", &E::suite, &SuiteOptions::tasks),
      count_field("tasks", "classes_per_task", &E::suite, &SuiteOptions::classes_per_task),
      count_field("tasks", "window", &E::suite, &SuiteOptions::window),
      real_field("tasks", "overlap", &E::suite, &SuiteOptions::overlap),
      count_field("tasks", "n_train", &E::suite, &SuiteOptions::n_train),
      count_field("tasks", "n_test", &E::suite, &SuiteOptions::n_test),
      real_field("tasks", "noise", &E::suite, &SuiteOptions::noise),
      count_field("tasks", "min_len", &E::suite, &SuiteOptions::min_len),
      count_field("tasks", "max_len", &E::suite, &SuiteOptions::max_len),
      {"tasks", "train_file", [](const E& c) { return json(c.train_file.string()); },
       [](E& c, const json& v, const std::string& name) { c.train_file = as_text(v, name); }},
      {"tasks", "test_file", [](const E& c) { return json(c.test_file.string()); },
       [](E& c, const json& v, const std::string& name) { c.test_file = as_text(v, name); }},

      count_field("gating", "width", &E::strategy, &StrategyConfig::gate_width),
      count_field("gating", "layers", &E::strategy, &StrategyConfig::gate_layers),
      real_field("gating", "init_std", &E::strategy, &StrategyConfig::gate_init_std),
      {"gating", "gate_fn", [](const E& c) { return json(std::string(to_string(c.strategy.gate_fn))); },
       [](E& c, const json& v, const std::string& name) {
         c.strategy.gate_fn = as_enum(v, name, parse_gate_fn);
       }},

      {"strategy", "branch",
       [](const E& c) { return json(std::string(to_string(c.strategy.branch))); },
       [](E& c, const json& v, const std::string& name) {
         c.strategy.branch = as_enum(v, name, parse_branch_strategy);
       }},
      {"strategy", "gating",
       [](const E& c) { return json(std::string(to_string(c.strategy.gating))); },
       [](E& c, const json& v, const std::string& name) {
         c.strategy.gating = as_enum(v, name, parse_gating_mode);
       }},
      real_field("strategy", "lambda", &E::strategy, &StrategyConfig::lambda),
      real_field("strategy", "eps_th", &E::strategy, &StrategyConfig::eps_th),
      count_field("strategy", "collect_samples", &E::strategy, &StrategyConfig::collect_samples),
      count_field("strategy", "rank", &E::strategy, &StrategyConfig::rank),
      real_field("strategy", "lora_std", &E::strategy, &StrategyConfig::lora_std),

      {"optim", "lr", [](const E& c) { return json(c.strategy.optim.lr); },
       [](E& c, const json& v, const std::string& n) { c.strategy.optim.lr = as_real(v, n); }},
      {"optim", "weight_decay", [](const E& c) { return json(c.strategy.optim.weight_decay); },
       [](E& c, const json& v, const std::string& n) { c.strategy.optim.weight_decay = as_real(v, n); }},
      {"optim", "beta1", [](const E& c) { return json(c.strategy.optim.beta1); },
       [](E& c, const json& v, const std::string& n) { c.strategy.optim.beta1 = as_real(v, n); }},
      {"optim", "beta2", [](const E& c) { return json(c.strategy.optim.beta2); },
       [](E& c, const json& v, const std::string& n) { c.strategy.optim.beta2 = as_real(v, n); }},
      {"optim", "eps", [](const E& c) { return json(c.strategy.optim.eps); },
       [](E& c, const json& v, const std::string& n) { c.strategy.optim.eps = as_real(v, n); }},
      count_field("optim", "epochs", &E::strategy, &StrategyConfig::epochs),
      count_field("optim", "batch_size", &E::strategy, &StrategyConfig::batch_size),
  };
  return table;
}

json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_integer()) return json(v->get());
  if (const auto* v = node.as_floating_point()) return json(v->get());
  if (const auto* v = node.as_boolean()) return json(v->get());
  if (const auto* v = node.as_string()) return json(v->get());
  throw Error(ErrorKind::ConfigError, "unsupported TOML value type (dates are not accepted)");
}

}  // namespace

void ExperimentConfig::validate() const {
  strategy.validate();
  require(!seeds.empty(), ErrorKind::ConfigError, "experiment.seeds must not be empty");
  require(!variants.empty(), ErrorKind::ConfigError, "experiment.variants must not be empty");
  require(model.vocab >= 1 && model.embed_dim >= 1 && model.hidden >= 1, ErrorKind::ConfigError,
          "model sizes must be positive");
  require(model.embed_std > 0.0, ErrorKind::ConfigError, "model.embed_std must be positive");
  require(suite.tasks >= 1, ErrorKind::ConfigError, "tasks.count must be at least 1");
  require(suite.classes_per_task >= 2, ErrorKind::ConfigError,
          "tasks.classes_per_task must be at least 2");
  require(strategy.rank <= std::min(model.embed_dim, model.hidden), ErrorKind::ConfigError,
          "strategy.rank exceeds the adapted layer sizes");
  require(suite.noise >= 0.0 && suite.noise <= 1.0, ErrorKind::ConfigError,
          "tasks.noise must lie in [0, 1]");
  require(suite.min_len >= 1 && suite.min_len <= suite.max_len, ErrorKind::ConfigError,
          "tasks.min_len must be in [1, max_len]");
  if (source == DataSource::Files) {
    require(!train_file.empty() && !test_file.empty(), ErrorKind::ConfigError,
            "tasks.source = \"files\" needs tasks.train_file and tasks.test_file");
  } else {
    suite_windows(suite, model.vocab);
  }
}

json config_to_json(const ExperimentConfig& config) {
  json out = json::object();
  for (const Field& f : fields()) out[f.section][f.key] = f.get(config);
  return out;
}

ExperimentConfig config_from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::ConfigError, "configuration root must be a table");
  ExperimentConfig config;
  for (const auto& [section, body] : doc.items()) {
    const bool known = std::any_of(fields().begin(), fields().end(),
                                   [&](const Field& f) { return section == f.section; });
    require(known, ErrorKind::ConfigError, "unknown key '" + section + "'");
    require(body.is_object(), ErrorKind::ConfigError, "'" + section + "' must be a table");
    for (const auto& [key, value] : body.items()) {
      const std::string name = section + "." + key;
      const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) {
        return section == f.section && key == f.key;
      });
      require(it != fields().end(), ErrorKind::ConfigError, "unknown key '" + name + "'");
      it->set(config, value, name);
    }
  }
  config.model.classes = config.suite.tasks * config.suite.classes_per_task;
  config.validate();
  return config;
}

json parse_toml(const std::string& text, const std::string& origin) {
  try {
    return toml_to_json(toml::parse(text, origin));
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    std::ostringstream msg;
    msg << origin << ":" << where.line << ":" << where.column << ": " << e.description();
    throw Error(ErrorKind::ParseError, msg.str());
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorKind::ConfigError,
          "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  const auto dot = key.find('.');
  require(dot != std::string::npos && dot > 0 && dot + 1 < key.size() &&
              key.find('.', dot + 1) == std::string::npos,
          ErrorKind::ConfigError, "override key '" + key + "' must be section.key");
  json value;
  try {
    value = toml_to_json(*toml::parse("v = " + raw)["v"].node());
  } catch (const toml::parse_error&) {
    value = raw;
  }
  doc[key.substr(0, dot)][key.substr(dot + 1)] = std::move(value);
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::ConfigError, "cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  json doc = parse_toml(text.str(), path.string());
  for (const std::string& o : overrides) apply_override(doc, o);
  ExperimentConfig config = config_from_json(doc);
  if (config.source == DataSource::Files) {
    const auto base = path.parent_path();
    if (config.train_file.is_relative()) config.train_file = base / config.train_file;
    if (config.test_file.is_relative()) config.test_file = base / config.test_file;
  }
  return config;
}

ExperimentInputs prepare_inputs(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentInputs in;
  in.strategy = config.strategy;
  in.strategy.seed = seed;
  BackboneShape shape = config.model;
  shape.classes = config.suite.tasks * config.suite.classes_per_task;
  Rng rng = Rng::derive(seed, kBackboneStream);
  in.backbone = Backbone::random(shape, rng);

  if (config.source == DataSource::Synthetic) {
    in.sequence = generate_suite(config.suite, in.backbone.embedding(), seed);
    return in;
  }
  const IngestLimits limits{shape.vocab, shape.classes};
  const auto train = split_by_task(
      ingest_dataset(config.train_file, format_from_path(config.train_file), limits));
  const auto test =
      split_by_task(ingest_dataset(config.test_file, format_from_path(config.test_file), limits));
  require(train.size() == config.suite.tasks && test.size() == config.suite.tasks,
          ErrorKind::SchemaError,
          "dataset files must hold exactly tasks.count = " + std::to_string(config.suite.tasks) +
              " task ids in both splits");
  in.sequence.n_classes = shape.classes;
  for (std::size_t t = 0; t < train.size(); ++t) {
    require(train[t].task_id == test[t].task_id, ErrorKind::SchemaError,
            "train and test task ids differ");
    TaskData d;
    d.train = train[t];
    d.test = test[t];
    require(!d.train.samples.empty() && !d.test.samples.empty(), ErrorKind::SchemaError,
            "task " + std::to_string(d.train.task_id) + " has an empty split");
    in.sequence.tasks.push_back(std::move(d));
  }
  return in;
}

}  // namespace gainlora
