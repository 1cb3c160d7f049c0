#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "gainlora/dataset.hpp"
#include "gainlora/error.hpp"
#include "gainlora/gating.hpp"
#include "support.hpp"

using namespace gainlora;
namespace fs = std::filesystem;

namespace {

Mat default_embedding(std::uint64_t seed = 1) {
  Rng rng(seed);
  return gaussian_init(rng, 256, 64, 1.0);
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "gainlora_model_tests";
  fs::create_directories(dir);
  std::ofstream(dir / name, std::ios::binary) << text;
  return dir / name;
}

TaskGenOptions small_options(VocabWindow w) {
  TaskGenOptions o;
  o.window = w;
  o.n_train = 101;
  o.n_test = 40;
  return o;
}

}  // namespace

TEST_CASE("generate_task is a pure function of its inputs") {
  const Mat e = default_embedding();
  Rng a(5);
  Rng b(5);
  const TaskData x = generate_task(a, 0, e, small_options({0, 8}), {}, false);
  const TaskData y = generate_task(b, 0, e, small_options({0, 8}), {}, false);
  CHECK(x.train == y.train);
  CHECK(x.test == y.test);
  CHECK(x.train.samples.size() == 101);
}

TEST_CASE("generated samples respect windows, balance and the teacher") {
  const Mat e = default_embedding();
  Rng rng(2);
  TaskGenOptions o = small_options({16, 24});
  o.n_classes = 3;
  o.class_offset = 6;
  const TaskData d = generate_task(rng, 4, e, o, {}, false);
  std::map<std::size_t, std::size_t> counts;
  for (const Sample& s : d.train.samples) {
    CHECK(s.task_id == 4);
    CHECK((s.tokens.size() >= 8 && s.tokens.size() <= 16));
    for (std::size_t t : s.tokens) CHECK((t >= 16 && t < 24));
    ++counts[s.label];
    // Noise-free labels reproduce the teacher exactly.
    CHECK(o.class_offset + d.teacher.classify(pool_embed(s.tokens, e)) == s.label);
  }
  CHECK(counts.size() == 3);
  for (auto [label, n] : counts) {
    CHECK((label >= 6 && label < 9));
    CHECK((n == 33 || n == 34));
  }
}

TEST_CASE("label noise keeps class counts and changes some labels") {
  const Mat e = default_embedding();
  TaskGenOptions o = small_options({0, 8});
  o.noise = 0.3;
  Rng rng(8);
  const TaskData d = generate_task(rng, 0, e, o, {}, false);
  std::size_t disagree = 0;
  std::map<std::size_t, std::size_t> counts;
  for (const Sample& s : d.train.samples) {
    disagree += d.teacher.classify(pool_embed(s.tokens, e)) != s.label;
    ++counts[s.label];
  }
  CHECK(disagree > 0);
  CHECK(disagree <= 31);
  CHECK((counts[0] == 50 || counts[0] == 51));
}

TEST_CASE("window overlap") {
  const Mat e = default_embedding();
  Rng rng(1);
  const std::vector<VocabWindow> taken{{0, 8}};
  CHECK_THROWS_AS(generate_task(rng, 1, e, small_options({4, 12}), taken, false), Error);
  CHECK_NOTHROW(generate_task(rng, 1, e, small_options({4, 12}), taken, true));

  SuiteOptions s;
  const auto w = suite_windows(s, 256);
  REQUIRE(w.size() == 5);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK_FALSE(w[i].intersects(w[i - 1]));
  s.overlap = 0.5;
  const auto o = suite_windows(s, 256);
  CHECK(o[1].intersects(o[0]));
  s.tasks = 100;
  CHECK_THROWS_AS(suite_windows(s, 256), Error);
}

TEST_CASE("disjoint windows use disjoint embedding rows") {
  const Mat e = default_embedding();
  SuiteOptions s;
  s.n_train = 50;
  s.n_test = 20;
  const TaskSequence seq = generate_suite(s, e, 3);
  std::vector<std::set<std::size_t>> used(s.tasks);
  for (std::size_t t = 0; t < s.tasks; ++t)
    for (const auto* split : {&seq.tasks[t].train, &seq.tasks[t].test})
      for (const Sample& x : split->samples) used[t].insert(x.tokens.begin(), x.tokens.end());
  for (std::size_t a = 0; a < s.tasks; ++a)
    for (std::size_t b = a + 1; b < s.tasks; ++b)
      for (std::size_t t : used[a]) CHECK(used[b].count(t) == 0);
  CHECK(seq.n_classes == 10);
  CHECK(generate_suite(s, e, 3).tasks[2].train == seq.tasks[2].train);
}

TEST_CASE("pooled embeddings identify the task under a linear probe") {
  const Mat e = default_embedding(4);
  const TaskSequence seq = generate_suite(SuiteOptions{}, e, 4);
  Backbone bb(e, {AdaptedLinear(Mat(64, 64)), AdaptedLinear(Mat(64, 64))}, Mat(10, 64));
  // Nearest class mean on training inputs: a linear classifier.
  std::vector<std::vector<double>> centroid;
  for (const TaskData& t : seq.tasks) {
    const Mat p = bb.pool(t.train);
    std::vector<double> c(64, 0.0);
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < 64; ++j) c[j] += p(i, j) / static_cast<double>(p.rows());
    centroid.push_back(c);
  }
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const Mat p = bb.pool(seq.tasks[t].test);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t c = 0; c < centroid.size(); ++c) {
        double d = 0.0;
        for (std::size_t j = 0; j < 64; ++j) d += (p(i, j) - centroid[c][j]) * (p(i, j) - centroid[c][j]);
        if (d < best_d) best_d = d, best = c;
      }
      correct += best == t;
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.99);
}

TEST_CASE("ingest JSONL") {
  const IngestLimits limits{10, 4};
  const auto ok = write_file("ok.jsonl",
                             "{\"tokens\": [1, 2, 3], \"label\": 1, \"task_id\": 0}\n"
                             "{\"tokens\": [4], \"label\": 3, \"task_id\": 1}\n");
  const Dataset d = ingest_dataset(ok, DataFormat::Jsonl, limits);
  REQUIRE(d.samples.size() == 2);
  CHECK(d.samples[0].tokens == std::vector<std::size_t>{1, 2, 3});
  CHECK(d.samples[1].label == 3);
  CHECK(split_by_task(d).size() == 2);

  std::vector<std::string> warnings;
  CHECK(ingest_dataset(write_file("empty.jsonl", ""), DataFormat::Jsonl, limits, &warnings).empty());
  CHECK(warnings.size() == 1);

  const auto bad_label = write_file("label.jsonl", "{\"tokens\": [1], \"label\": 4, \"task_id\": 0}\n");
  try {
    ingest_dataset(bad_label, DataFormat::Jsonl, limits);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaError);
  }
  const auto bad_id = write_file("id.jsonl", "{\"tokens\": [10], \"label\": 0, \"task_id\": 0}\n");
  try {
    ingest_dataset(bad_id, DataFormat::Jsonl, limits);
    FAIL("expected IdOutOfRange");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IdOutOfRange);
  }
  const auto broken = write_file("broken.jsonl",
                                 "{\"tokens\": [1], \"label\": 0, \"task_id\": 0}\n{\"tokens\": [1\n");
  try {
    ingest_dataset(broken, DataFormat::Jsonl, limits);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("ingest CSV") {
  const IngestLimits limits{10, 4};
  const auto ok = write_file("ok.csv", "tokens,label,task_id\n1 2 3,1,0\n4,3,1\n");
  const Dataset d = ingest_dataset(ok, format_from_path(ok), limits);
  REQUIRE(d.samples.size() == 2);
  CHECK(d.samples[0].tokens == std::vector<std::size_t>{1, 2, 3});
  const auto missing = write_file("missing.csv", "tokens,label\n1,0\n");
  CHECK_THROWS_AS(ingest_dataset(missing, DataFormat::Csv, limits), Error);
  const auto bad = write_file("bad.csv", "tokens,label,task_id\n1 x,0,0\n");
  CHECK_THROWS_AS(ingest_dataset(bad, DataFormat::Csv, limits), Error);
  CHECK_THROWS_AS(format_from_path("data.txt"), Error);
}

TEST_CASE("backbone forward") {
  Rng rng(6);
  BackboneShape shape;
  shape.vocab = 20;
  shape.embed_dim = 6;
  shape.hidden = 5;
  shape.classes = 3;
  Backbone bb = Backbone::random(shape, rng);
  const std::vector<std::size_t> tokens{1, 4, 4, 19};
  const std::vector<double> frozen = backbone_forward(bb, std::vector<double>{}, tokens);
  CHECK(frozen.size() == 3);
  CHECK_THROWS_AS(backbone_forward(bb, std::vector<double>{}, std::vector<std::size_t>{20}), Error);

  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    bb.layer(l).expand(2, rng);
    bb.layer(l).mutable_branches().back().a = testing::random_mat(rng, bb.layer(l).d_out(), 2);
  }
  CHECK(backbone_forward(bb, std::vector<double>{0.0}, tokens) == frozen);
  CHECK(backbone_forward(bb, std::vector<double>{1.0}, tokens) != frozen);

  // Tape path against the single-sample reference.
  Dataset one;
  one.samples.push_back(Sample{tokens, 0, 0});
  Tape t;
  const Var x = t.input(bb.pool(one));
  const BackboneVars vars = register_backbone(t, bb);
  const std::vector<std::optional<Var>> coeffs{t.input(Mat(1, 1, 0.7))};
  const Mat logits = t.value(backbone_graph(t, vars, x, coeffs).logits);
  const std::vector<double> ref = backbone_forward(bb, std::vector<double>{0.7}, tokens);
  for (std::size_t c = 0; c < 3; ++c) CHECK(logits(0, c) == doctest::Approx(ref[c]).epsilon(1e-12));
}

TEST_CASE("end-to-end model gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    BackboneShape shape;
    shape.vocab = 20;
    shape.embed_dim = 6;
    shape.hidden = 5;
    shape.classes = 3;
    Backbone bb = Backbone::random(shape, rng);
    for (int b = 0; b < 2; ++b)
      for (std::size_t l = 0; l < kAdaptedLayers; ++l) bb.layer(l).expand(2, rng, 0.5);
    Dataset data;
    for (int i = 0; i < 6; ++i) {
      std::vector<std::size_t> tok(3 + rng.index(4));
      for (auto& t : tok) t = rng.index(20);
      data.samples.push_back(Sample{tok, rng.index(3), 0});
    }
    const Mat pooled = bb.pool(data);
    std::vector<std::size_t> labels;
    for (const Sample& s : data.samples) labels.push_back(s.label);

    // Parameters: A/B of the newest branch in both layers, plus a 2-layer gate.
    std::vector<Mat> params;
    for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
      params.push_back(testing::random_mat(rng, bb.layer(l).d_out(), 2, 0.5));
      params.push_back(bb.layer(l).branches().back().b);
    }
    params.push_back(testing::random_mat(rng, 4, 6, 0.5));
    params.push_back(testing::random_mat(rng, 1, 4, 0.5));
    const Mat old_gate = testing::random_mat(rng, 6, 1);

    auto build = [&](Tape& t, const std::vector<Var>& v) {
      Backbone model = bb;
      for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
        model.layer(l).mutable_branches().back().a = t.value(v[2 * l]);
        model.layer(l).mutable_branches().back().b = t.value(v[2 * l + 1]);
      }
      const Var x = t.input(pooled);
      BackboneVars vars = register_backbone(t, model);
      for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
        vars.branches[l].back() = BranchVars{v[2 * l], v[2 * l + 1]};
      }
      const Var old = t.sigmoid(t.matmul(x, t.input(old_gate)));
      const Var hidden = t.silu(t.matmul(x, t.transpose(v[4])));
      const Var gate = t.gate(t.matmul(hidden, t.transpose(v[5])), GateFn::Sigmoid);
      const std::vector<std::optional<Var>> coeffs{old, gate};
      return t.softmax_cross_entropy(backbone_graph(t, vars, x, coeffs).logits, labels);
    };
    CHECK(testing::gradient_error(build, params) <= 1e-4);
  }
}
