#pragma once

// Desk-scale stand-in for a pre-trained model: frozen embeddings, two frozen
// linear layers carrying LoRA branches, SiLU activations and a frozen
// classifier head over the union of all task labels.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gainlora/adapter.hpp"
#include "gainlora/autodiff.hpp"
#include "gainlora/dataset.hpp"
#include "gainlora/mat.hpp"
#include "gainlora/rng.hpp"

namespace gainlora {

struct BackboneShape {
  std::size_t vocab = 256;
  std::size_t embed_dim = 64;
  std::size_t hidden = 64;
  std::size_t classes = 10;
  double embed_std = 1.0;
};

inline constexpr std::size_t kAdaptedLayers = 2;

class Backbone {
 public:
  Backbone() = default;
  Backbone(Mat embedding, std::array<AdaptedLinear, kAdaptedLayers> layers, Mat head);

  // Embedding N(0, embed_std^2); linear weights N(0, 1/d_in).
  static Backbone random(const BackboneShape& shape, Rng& rng);

  [[nodiscard]] const Mat& embedding() const noexcept { return embedding_; }
  [[nodiscard]] const Mat& head() const noexcept { return head_; }
  [[nodiscard]] const AdaptedLinear& layer(std::size_t i) const { return layers_[i]; }
  [[nodiscard]] AdaptedLinear& layer(std::size_t i) { return layers_[i]; }
  [[nodiscard]] std::size_t vocab() const noexcept { return embedding_.rows(); }
  [[nodiscard]] std::size_t embed_dim() const noexcept { return embedding_.cols(); }
  [[nodiscard]] std::size_t classes() const noexcept { return head_.rows(); }
  [[nodiscard]] std::size_t branch_count() const noexcept { return layers_[0].branches().size(); }

  // n x d pooled embeddings, one row per sample.
  [[nodiscard]] Mat pool(const Dataset& data) const;

  bool operator==(const Backbone&) const = default;

 private:
  Mat embedding_;
  std::array<AdaptedLinear, kAdaptedLayers> layers_;
  Mat head_;
};

// Single-sample reference forward; coeffs holds one a_i per branch.
std::vector<double> backbone_forward(const Backbone& model, std::span<const double> coeffs,
                                     std::span<const std::size_t> tokens);

// Tape handles for the LoRA matrices; trainable ones are params.
struct BranchVars {
  Var a;
  Var b;
};

struct BackboneVars {
  std::array<Var, kAdaptedLayers> weight_t;
  std::array<std::vector<BranchVars>, kAdaptedLayers> branches;
  Var head_t;
};

BackboneVars register_backbone(Tape& tape, const Backbone& model);

struct BackboneGraph {
  Var logits;
  std::array<Var, kAdaptedLayers> layer_inputs;
};

// Batched forward on the tape. coeffs[i] is an n x 1 coefficient column for
// branch i, or nullopt for a fixed coefficient of 1.
BackboneGraph backbone_graph(Tape& tape, const BackboneVars& vars, Var pooled,
                             std::span<const std::optional<Var>> coeffs);

}  // namespace gainlora
