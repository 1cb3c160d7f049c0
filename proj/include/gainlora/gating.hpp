#pragma once

// Per-task gating networks producing integration coefficients in [0, 1]:
//   p_0 = mean token embedding, p_l = SiLU(G_l p_{l-1}) for l <= L,
//   a   = f(G_{L+1} p_L).

#include <cstddef>
#include <span>
#include <vector>

#include "gainlora/activation.hpp"
#include "gainlora/mat.hpp"
#include "gainlora/rng.hpp"
#include "gainlora/subspace.hpp"

namespace gainlora {

// Checks b is finite and evaluates the gate map.
double gate_fn(GateFn f, double b);

// Mean of the embedding rows selected by tokens.
std::vector<double> pool_embed(std::span<const std::size_t> tokens, const Mat& embedding);

struct GatingShape {
  std::size_t input_dim = 0;
  // Output widths of the L hidden layers; the final layer maps to a scalar.
  std::vector<std::size_t> hidden;

  // Input dimension of every layer 1..L+1.
  [[nodiscard]] std::vector<std::size_t> layer_inputs() const;
  [[nodiscard]] std::size_t parameter_count() const;
};

// Hidden widths w, d as in the reference architecture: G_1 is w x d,
// G_2 is d x w, G_3 is 1 x d.
GatingShape default_gating_shape(std::size_t embed_dim, std::size_t width);

struct GateTrace {
  double output = 0.0;
  // p_0 .. p_L; entry l is the input of layer l + 1.
  std::vector<std::vector<double>> layer_inputs;
};

class GatingModule {
 public:
  GatingModule() = default;
  GatingModule(std::vector<Mat> layers, GateFn gate);

  [[nodiscard]] const std::vector<Mat>& layers() const noexcept { return layers_; }
  [[nodiscard]] std::vector<Mat>& mutable_layers() noexcept { return layers_; }
  [[nodiscard]] GateFn gate() const noexcept { return gate_; }
  [[nodiscard]] std::size_t hidden_layers() const noexcept { return layers_.size() - 1; }
  [[nodiscard]] std::size_t input_dim() const { return layers_.front().cols(); }
  [[nodiscard]] bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  GateTrace forward(std::span<const double> p0) const;
  // Batched: rows of p0 are inputs; returns n x 1 coefficients.
  Mat forward_batch(const Mat& p0) const;
  // Batched layer inputs p_0..p_L, each n x in_l.
  std::vector<Mat> trace_batch(const Mat& p0) const;

  bool operator==(const GatingModule&) const = default;

 private:
  std::vector<Mat> layers_;
  GateFn gate_ = GateFn::AbsSigmoid;
  bool frozen_ = false;
};

struct GatingInitOptions {
  GatingShape shape;
  GateFn gate = GateFn::AbsSigmoid;
  double init_std = 0.02;
  // Remove the component of the initial final layer inside the stored
  // subspace of its inputs.
  bool project_final = true;
};

// First task: every layer Gaussian. Later tasks: hidden layers copied from
// prev, final layer Gaussian then projected off memory.layers.back().
GatingModule init_new_gating(const GatingModule* prev, const SubspaceMemory& memory,
                             const GatingInitOptions& options, Rng& rng);

// delta (I - M M^T): each row of the proposed change loses its component in
// span(M). delta has M.dim() columns.
Mat constrain_update(const Mat& delta, const SubspaceBasis& m);

// Ordered gates g_1..g_t; only the newest is trainable.
class GatingBank {
 public:
  void push(GatingModule module);
  [[nodiscard]] std::size_t size() const noexcept { return modules_.size(); }
  [[nodiscard]] bool empty() const noexcept { return modules_.empty(); }
  [[nodiscard]] const GatingModule& operator[](std::size_t i) const { return modules_[i]; }
  [[nodiscard]] GatingModule& newest() { return modules_.back(); }
  [[nodiscard]] const GatingModule& newest() const { return modules_.back(); }
  void freeze_all();
  [[nodiscard]] const std::vector<GatingModule>& modules() const noexcept { return modules_; }

  bool operator==(const GatingBank&) const = default;

 private:
  std::vector<GatingModule> modules_;
};

}  // namespace gainlora
