#include "gainlora/checkpoint.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include "gainlora/error.hpp"

namespace gainlora {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key) {
  require(j.is_object() && j.contains(key), ErrorKind::SchemaError,
          std::string("checkpoint is missing '") + key + "'");
  return j.at(key);
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("checkpoint field '") + key + "': " + e.what());
  }
}

json basis_to_json(const SubspaceBasis& b) {
  return json{{"dim", b.dim()}, {"basis", mat_to_json(b.basis())}};
}

SubspaceBasis basis_from_json(const json& j) {
  const auto dim = get<std::size_t>(j, "dim");
  Mat m = mat_from_json(field(j, "basis"));
  if (m.cols() == 0) return SubspaceBasis(dim);
  require(m.rows() == dim, ErrorKind::SchemaError, "basis rows differ from its dim");
  try {
    return SubspaceBasis(std::move(m));
  } catch (const Error& e) {
    throw Error(ErrorKind::SchemaError, std::string("stored basis invalid: ") + e.what());
  }
}

json state_to_json(const LearnerState& s) {
  json layers = json::array();
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    const AdaptedLinear& layer = s.backbone.layer(l);
    json branches = json::array();
    for (const LoraBranch& b : layer.branches()) {
      branches.push_back(json{{"a", mat_to_json(b.a)},
                              {"b", mat_to_json(b.b)},
                              {"train_a", b.train_a},
                              {"train_b", b.train_b}});
    }
    layers.push_back(json{{"weight", mat_to_json(layer.weight())}, {"branches", branches}});
  }
  json gates = json::array();
  for (const GatingModule& g : s.gates.modules()) {
    json mats = json::array();
    for (const Mat& m : g.layers()) mats.push_back(mat_to_json(m));
    gates.push_back(json{{"layers", mats},
                         {"gate_fn", std::string(to_string(g.gate()))},
                         {"frozen", g.frozen()}});
  }
  json memory = json::array();
  for (const SubspaceBasis& b : s.memory.layers) memory.push_back(basis_to_json(b));
  json grad = json::array();
  for (const SubspaceBasis& b : s.grad_space) grad.push_back(basis_to_json(b));
  return json{{"tasks_learned", s.tasks_learned},
              {"backbone",
               {{"embedding", mat_to_json(s.backbone.embedding())},
                {"head", mat_to_json(s.backbone.head())},
                {"layers", layers}}},
              {"gates", gates},
              {"memory", {{"eps_th", s.memory.eps_th}, {"layers", memory}}},
              {"grad_space", grad}};
}

LearnerState state_from_json(const json& j) {
  LearnerState s;
  s.tasks_learned = get<std::size_t>(j, "tasks_learned");
  const json& bb = field(j, "backbone");
  const json& layers = field(bb, "layers");
  require(layers.is_array() && layers.size() == kAdaptedLayers, ErrorKind::SchemaError,
          "backbone must have " + std::to_string(kAdaptedLayers) + " adapted layers");
  std::array<AdaptedLinear, kAdaptedLayers> adapted;
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    adapted[l] = AdaptedLinear(mat_from_json(field(layers[l], "weight")));
    for (const json& b : field(layers[l], "branches")) {
      LoraBranch br{mat_from_json(field(b, "a")), mat_from_json(field(b, "b")),
                    get<bool>(b, "train_a"), get<bool>(b, "train_b")};
      require(br.a.rows() == adapted[l].d_out() && br.b.cols() == adapted[l].d_in() &&
                  br.a.cols() == br.b.rows(),
              ErrorKind::SchemaError, "branch shape mismatch in layer " + std::to_string(l));
      adapted[l].mutable_branches().push_back(std::move(br));
    }
  }
  require(adapted[0].branches().size() == adapted[1].branches().size(), ErrorKind::SchemaError,
          "adapted layers disagree on branch count");
  s.backbone = Backbone(mat_from_json(field(bb, "embedding")), std::move(adapted),
                        mat_from_json(field(bb, "head")));
  for (const json& g : field(j, "gates")) {
    std::vector<Mat> mats;
    for (const json& m : field(g, "layers")) mats.push_back(mat_from_json(m));
    GateFn fn;
    try {
      fn = parse_gate_fn(get<std::string>(g, "gate_fn"));
    } catch (const Error& e) {
      throw Error(ErrorKind::SchemaError, e.what());
    }
    GatingModule module(std::move(mats), fn);
    if (get<bool>(g, "frozen")) module.freeze();
    s.gates.push(std::move(module));
  }
  const json& memory = field(j, "memory");
  s.memory.eps_th = get<double>(memory, "eps_th");
  for (const json& b : field(memory, "layers")) s.memory.layers.push_back(basis_from_json(b));
  for (const json& b : field(j, "grad_space")) s.grad_space.push_back(basis_from_json(b));
  return s;
}

}  // namespace

json mat_to_json(const Mat& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Mat mat_from_json(const json& j) {
  const auto rows = get<std::size_t>(j, "rows");
  const auto cols = get<std::size_t>(j, "cols");
  const auto data = get<std::vector<double>>(j, "data");
  require(data.size() == rows * cols, ErrorKind::SchemaError,
          "matrix data has " + std::to_string(data.size()) + " values, expected " +
              std::to_string(rows * cols));
  Mat m(rows, cols);
  std::copy(data.begin(), data.end(), m.data().begin());
  require(all_finite(m), ErrorKind::SchemaError, "matrix holds non-finite values");
  return m;
}

json checkpoint_to_json(const Checkpoint& cp) {
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"seed", cp.seed},
              {"config", cp.config},
              {"tasks", cp.accuracy.tasks()},
              {"accuracy", cp.accuracy.rows()},
              {"state", state_to_json(cp.state)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  require(get<std::string>(j, "format") == kCheckpointFormat, ErrorKind::SchemaError,
          "not a checkpoint file");
  const int version = get<int>(j, "version");
  require(version == kCheckpointVersion, ErrorKind::SchemaError,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint cp;
  cp.seed = get<std::uint64_t>(j, "seed");
  cp.config = field(j, "config");
  try {
    cp.accuracy = AccuracyMatrix::from_rows(get<std::vector<std::vector<double>>>(j, "accuracy"),
                                            get<std::size_t>(j, "tasks"));
  } catch (const Error& e) {
    throw Error(ErrorKind::SchemaError, std::string("accuracy rows: ") + e.what());
  }
  cp.state = state_from_json(field(j, "state"));
  require(cp.accuracy.rows_filled() == cp.state.tasks_learned, ErrorKind::SchemaError,
          "accuracy rows differ from tasks learned");
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out << checkpoint_to_json(cp).dump() << '\n';
    require(static_cast<bool>(out), ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& seed_dir, std::size_t task) {
  return seed_dir / ("checkpoint_task_" + std::to_string(task) + ".json");
}

std::filesystem::path latest_checkpoint(const std::filesystem::path& seed_dir) {
  if (!std::filesystem::is_directory(seed_dir)) return {};
  static const std::regex pattern(R"(checkpoint_task_(\d+)\.json)");
  std::filesystem::path best;
  long best_task = -1;
  for (const auto& entry : std::filesystem::directory_iterator(seed_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern) && std::stol(m[1]) > best_task) {
      best_task = std::stol(m[1]);
      best = entry.path();
    }
  }
  return best;
}

}  // namespace gainlora
