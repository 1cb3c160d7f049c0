#include "gainlora/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "gainlora/error.hpp"
#include "gainlora/gating.hpp"

namespace gainlora {

std::size_t LinearTeacher::classify(std::span<const double> pooled) const {
  double score = 0.0;
  for (std::size_t j = 0; j < direction.size(); ++j) {
    score += direction[j] * pooled[j];
  }
  return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), score) -
                                  thresholds.begin());
}

namespace {

constexpr std::size_t kReferenceSamples = 4096;

std::vector<std::size_t> draw_sequence(Rng& rng, const TaskGenOptions& o) {
  const std::size_t len = o.min_len + rng.index(o.max_len - o.min_len + 1);
  std::vector<std::size_t> tokens(len);
  for (auto& t : tokens) {
    t = o.window.begin + rng.index(o.window.size());
  }
  return tokens;
}

std::vector<std::size_t> quotas(std::size_t n, std::size_t k) {
  std::vector<std::size_t> q(k, n / k);
  for (std::size_t c = 0; c < n % k; ++c) {
    ++q[c];
  }
  return q;
}

Dataset draw_split(Rng& rng, std::size_t task_id, const Mat& embedding, const TaskGenOptions& o,
                   const LinearTeacher& teacher, std::size_t n) {
  Dataset ds;
  ds.task_id = task_id;
  std::vector<std::size_t> remaining = quotas(n, o.n_classes);
  const std::size_t max_attempts = 1000 * (n + 1);
  for (std::size_t attempt = 0; ds.samples.size() < n; ++attempt) {
    require(attempt < max_attempts, ErrorKind::ConfigError,
            "task " + std::to_string(task_id) + ": cannot fill balanced class quotas");
    std::vector<std::size_t> tokens = draw_sequence(rng, o);
    const std::size_t cls = teacher.classify(pool_embed(tokens, embedding));
    if (remaining[cls] == 0) {
      continue;
    }
    --remaining[cls];
    ds.samples.push_back(Sample{std::move(tokens), o.class_offset + cls, task_id});
  }

  const auto noisy = static_cast<std::size_t>(std::llround(o.noise * static_cast<double>(n)));
  if (noisy > 1) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < noisy; ++i) labels.push_back(ds.samples[order[i]].label);
    rng.shuffle(std::span<std::size_t>(labels));
    for (std::size_t i = 0; i < noisy; ++i) ds.samples[order[i]].label = labels[i];
  }
  return ds;
}

}  // namespace

TaskData generate_task(Rng& rng, std::size_t task_id, const Mat& embedding,
                       const TaskGenOptions& o, std::span<const VocabWindow> taken,
                       bool allow_overlap) {
  require(o.n_classes >= 2, ErrorKind::ConfigError, "a task needs at least two classes");
  require(o.window.size() >= 1 && o.window.end <= embedding.rows(), ErrorKind::IdOutOfRange,
          "vocab window outside the embedding table");
  require(o.min_len >= 1 && o.min_len <= o.max_len, ErrorKind::ConfigError,
          "sequence length range");
  require(o.noise >= 0.0 && o.noise <= 1.0, ErrorKind::ConfigError, "noise must lie in [0, 1]");
  if (!allow_overlap) {
    for (const VocabWindow& w : taken) {
      require(!o.window.intersects(w), ErrorKind::WindowOverlap,
              "window [" + std::to_string(o.window.begin) + "," + std::to_string(o.window.end) +
                  ") meets [" + std::to_string(w.begin) + "," + std::to_string(w.end) + ")");
    }
  }

  TaskData data;
  data.teacher.direction.resize(embedding.cols());
  for (double& v : data.teacher.direction) {
    v = rng.normal();
  }
  std::vector<double> scores(kReferenceSamples);
  for (double& s : scores) {
    const auto pooled = pool_embed(draw_sequence(rng, o), embedding);
    s = 0.0;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      s += data.teacher.direction[j] * pooled[j];
    }
  }
  std::sort(scores.begin(), scores.end());
  for (std::size_t k = 1; k < o.n_classes; ++k) {
    data.teacher.thresholds.push_back(scores[k * scores.size() / o.n_classes]);
  }

  data.train = draw_split(rng, task_id, embedding, o, data.teacher, o.n_train);
  data.test = draw_split(rng, task_id, embedding, o, data.teacher, o.n_test);
  return data;
}

std::vector<VocabWindow> suite_windows(const SuiteOptions& o, std::size_t vocab) {
  require(o.window >= 1, ErrorKind::ConfigError, "tasks.window must be positive");
  require(o.overlap >= 0.0 && o.overlap < 1.0, ErrorKind::ConfigError,
          "tasks.overlap must lie in [0, 1)");
  const auto stride = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(o.window) * (1.0 - o.overlap))));
  std::vector<VocabWindow> windows;
  for (std::size_t t = 0; t < o.tasks; ++t) {
    const VocabWindow w{t * stride, t * stride + o.window};
    require(w.end <= vocab, ErrorKind::ConfigError,
            "task " + std::to_string(t + 1) + " window exceeds vocab " + std::to_string(vocab));
    windows.push_back(w);
  }
  return windows;
}

TaskSequence generate_suite(const SuiteOptions& o, const Mat& embedding, std::uint64_t seed) {
  require(o.tasks >= 1, ErrorKind::ConfigError, "tasks.count must be at least 1");
  const std::vector<VocabWindow> windows = suite_windows(o, embedding.rows());
  TaskSequence seq;
  seq.n_classes = o.tasks * o.classes_per_task;
  for (std::size_t t = 0; t < o.tasks; ++t) {
    TaskGenOptions g;
    g.window = windows[t];
    g.n_classes = o.classes_per_task;
    g.class_offset = t * o.classes_per_task;
    g.n_train = o.n_train;
    g.n_test = o.n_test;
    g.noise = o.noise;
    g.min_len = o.min_len;
    g.max_len = o.max_len;
    Rng rng = Rng::derive(seed, kDataStream + t);
    seq.tasks.push_back(generate_task(rng, t, embedding, g,
                                      std::span<const VocabWindow>(windows.data(), t),
                                      o.overlap > 0.0));
  }
  return seq;
}

DataFormat format_from_path(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".jsonl") return DataFormat::Jsonl;
  if (ext == ".csv") return DataFormat::Csv;
  throw Error(ErrorKind::ConfigError, "cannot infer dataset format from '" + path.string() + "'");
}

namespace {

std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::size_t parse_index(std::string_view text, ErrorKind kind, const std::string& where) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  require(ec == std::errc() && ptr == text.data() + text.size() && !text.empty(), kind,
          where + ": expected a non-negative integer, got '" + std::string(text) + "'");
  return value;
}

void validate(const Sample& s, const IngestLimits& limits, const std::string& where) {
  require(!s.tokens.empty(), ErrorKind::SchemaError, where + ": empty token list");
  for (std::size_t t : s.tokens) {
    require(t < limits.vocab, ErrorKind::IdOutOfRange,
            where + ": token " + std::to_string(t) + " >= vocab " + std::to_string(limits.vocab));
  }
  require(s.label < limits.classes, ErrorKind::SchemaError,
          where + ": label " + std::to_string(s.label) + " >= class count " +
              std::to_string(limits.classes));
}

Sample parse_jsonl_line(const std::string& line, const std::string& where) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, where + ": " + e.what());
  }
  require(j.is_object(), ErrorKind::SchemaError, where + ": expected an object");
  for (const char* key : {"tokens", "label", "task_id"}) {
    require(j.contains(key), ErrorKind::SchemaError, where + ": missing field '" + key + "'");
  }
  require(j["tokens"].is_array(), ErrorKind::SchemaError, where + ": tokens must be an array");
  Sample s;
  for (const auto& t : j["tokens"]) {
    require(t.is_number_unsigned(), ErrorKind::SchemaError,
            where + ": tokens must be non-negative integers");
    s.tokens.push_back(t.get<std::size_t>());
  }
  require(j["label"].is_number_unsigned(), ErrorKind::SchemaError,
          where + ": label must be a non-negative integer");
  require(j["task_id"].is_number_unsigned(), ErrorKind::SchemaError,
          where + ": task_id must be a non-negative integer");
  s.label = j["label"].get<std::size_t>();
  s.task_id = j["task_id"].get<std::size_t>();
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

}  // namespace

Dataset ingest_dataset(const std::filesystem::path& path, DataFormat format,
                       const IngestLimits& limits, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;

  if (format == DataFormat::Jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) {
        continue;
      }
      const std::string where = at_line(path, line_no);
      Sample s = parse_jsonl_line(line, where);
      validate(s, limits, where);
      ds.samples.push_back(std::move(s));
    }
  } else {
    std::map<std::string, std::size_t> columns;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) {
        continue;
      }
      const std::string where = at_line(path, line_no);
      const std::vector<std::string> fields = split_csv(line);
      if (columns.empty()) {
        for (std::size_t i = 0; i < fields.size(); ++i) columns[fields[i]] = i;
        for (const char* key : {"tokens", "label", "task_id"}) {
          require(columns.contains(key), ErrorKind::SchemaError,
                  where + ": header lacks column '" + key + "'");
        }
        continue;
      }
      require(fields.size() == columns.size(), ErrorKind::ParseError,
              where + ": expected " + std::to_string(columns.size()) + " fields, got " +
                  std::to_string(fields.size()));
      Sample s;
      std::istringstream tokens(fields[columns["tokens"]]);
      std::string tok;
      while (tokens >> tok) {
        s.tokens.push_back(parse_index(tok, ErrorKind::ParseError, where));
      }
      s.label = parse_index(fields[columns["label"]], ErrorKind::ParseError, where);
      s.task_id = parse_index(fields[columns["task_id"]], ErrorKind::ParseError, where);
      validate(s, limits, where);
      ds.samples.push_back(std::move(s));
    }
  }

  if (ds.samples.empty()) {
    if (warnings != nullptr) {
      warnings->push_back("'" + path.string() + "' holds no samples");
    }
  } else {
    ds.task_id = ds.samples.front().task_id;
  }
  return ds;
}

std::vector<Dataset> split_by_task(const Dataset& all) {
  std::map<std::size_t, Dataset> groups;
  for (const Sample& s : all.samples) {
    Dataset& d = groups[s.task_id];
    d.task_id = s.task_id;
    d.samples.push_back(s);
  }
  std::vector<Dataset> out;
  for (auto& [id, d] : groups) {
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace gainlora
