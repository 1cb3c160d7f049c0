#include "gainlora/backbone.hpp"

#include <cmath>
#include <string>

#include "gainlora/activation.hpp"
#include "gainlora/error.hpp"
#include "gainlora/gating.hpp"

namespace gainlora {

Backbone::Backbone(Mat embedding, std::array<AdaptedLinear, kAdaptedLayers> layers, Mat head)
    : embedding_(std::move(embedding)), layers_(std::move(layers)), head_(std::move(head)) {
  require(layers_[0].d_in() == embedding_.cols(), ErrorKind::ShapeMismatch,
          "first adapted layer input");
  require(layers_[1].d_in() == layers_[0].d_out(), ErrorKind::ShapeMismatch,
          "second adapted layer input");
  require(head_.cols() == layers_[1].d_out(), ErrorKind::ShapeMismatch, "head input");
}

Backbone Backbone::random(const BackboneShape& s, Rng& rng) {
  Mat embedding = gaussian_init(rng, s.vocab, s.embed_dim, s.embed_std);
  std::array<AdaptedLinear, kAdaptedLayers> layers{
      AdaptedLinear(gaussian_init(rng, s.hidden, s.embed_dim,
                                  1.0 / std::sqrt(static_cast<double>(s.embed_dim)))),
      AdaptedLinear(gaussian_init(rng, s.hidden, s.hidden,
                                  1.0 / std::sqrt(static_cast<double>(s.hidden))))};
  Mat head = gaussian_init(rng, s.classes, s.hidden, 1.0 / std::sqrt(static_cast<double>(s.hidden)));
  return Backbone(std::move(embedding), std::move(layers), std::move(head));
}

Mat Backbone::pool(const Dataset& data) const {
  Mat pooled(data.size(), embed_dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> p = pool_embed(data.samples[i].tokens, embedding_);
    std::copy(p.begin(), p.end(), pooled.row_span(i).begin());
  }
  return pooled;
}

std::vector<double> backbone_forward(const Backbone& model, std::span<const double> coeffs,
                                     std::span<const std::size_t> tokens) {
  std::vector<double> h = pool_embed(tokens, model.embedding());
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    h = adapted_forward(model.layer(l), coeffs, h);
    for (double& v : h) {
      v = silu(v);
    }
  }
  return matmul(model.head(), Mat::column(h)).col_vector(0);
}

BackboneVars register_backbone(Tape& tape, const Backbone& model) {
  BackboneVars vars;
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    const AdaptedLinear& layer = model.layer(l);
    vars.weight_t[l] = tape.input(transpose(layer.weight()));
    for (const LoraBranch& br : layer.branches()) {
      const Var a = br.train_a ? tape.param(br.a) : tape.input(br.a);
      const Var b = br.train_b ? tape.param(br.b) : tape.input(br.b);
      vars.branches[l].push_back(BranchVars{a, b});
    }
  }
  vars.head_t = tape.input(transpose(model.head()));
  return vars;
}

BackboneGraph backbone_graph(Tape& tape, const BackboneVars& vars, Var pooled,
                             std::span<const std::optional<Var>> coeffs) {
  BackboneGraph graph;
  Var h = pooled;
  for (std::size_t l = 0; l < kAdaptedLayers; ++l) {
    graph.layer_inputs[l] = h;
    const auto& branches = vars.branches[l];
    require(coeffs.size() == branches.size(), ErrorKind::ShapeMismatch,
            "one coefficient per branch: " + std::to_string(coeffs.size()) + " vs " +
                std::to_string(branches.size()));
    Var e = tape.matmul(h, vars.weight_t[l]);
    for (std::size_t i = 0; i < branches.size(); ++i) {
      Var low = tape.matmul(h, tape.transpose(branches[i].b));
      Var delta = tape.matmul(low, tape.transpose(branches[i].a));
      if (coeffs[i]) {
        delta = tape.row_scale(delta, *coeffs[i]);
      }
      e = tape.add(e, delta);
    }
    h = tape.silu(e);
  }
  graph.logits = tape.matmul(h, vars.head_t);
  return graph;
}

}  // namespace gainlora
