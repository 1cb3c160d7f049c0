#include "gainlora/gating.hpp"

#include <cmath>
#include <string>

#include "gainlora/error.hpp"

namespace gainlora {

double gate_fn(GateFn f, double b) {
  require(std::isfinite(b), ErrorKind::NonFinite, "gate input");
  return gate_value(f, b);
}

std::vector<double> pool_embed(std::span<const std::size_t> tokens, const Mat& embedding) {
  require(!tokens.empty(), ErrorKind::EmptyInput, "pooling an empty token sequence");
  std::vector<double> pooled(embedding.cols(), 0.0);
  for (std::size_t t : tokens) {
    require(t < embedding.rows(), ErrorKind::IdOutOfRange,
            "token " + std::to_string(t) + " >= vocab " + std::to_string(embedding.rows()));
    const auto row = embedding.row_span(t);
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      pooled[j] += row[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : pooled) {
    v *= inv;
  }
  return pooled;
}

std::vector<std::size_t> GatingShape::layer_inputs() const {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  return dims;
}

std::size_t GatingShape::parameter_count() const {
  std::size_t count = 0;
  std::size_t in = input_dim;
  for (std::size_t out : hidden) {
    count += out * in;
    in = out;
  }
  return count + in;
}

GatingShape default_gating_shape(std::size_t embed_dim, std::size_t width) {
  return GatingShape{embed_dim, {width, embed_dim}};
}

GatingModule::GatingModule(std::vector<Mat> layers, GateFn gate)
    : layers_(std::move(layers)), gate_(gate) {
  require(!layers_.empty(), ErrorKind::ShapeMismatch, "gating module without layers");
  for (std::size_t l = 1; l < layers_.size(); ++l) {
    require(layers_[l].cols() == layers_[l - 1].rows(), ErrorKind::ShapeMismatch,
            "gating layer " + std::to_string(l + 1) + " does not chain");
  }
  require(layers_.back().rows() == 1, ErrorKind::ShapeMismatch, "final gating layer must be 1 x d");
}

GateTrace GatingModule::forward(std::span<const double> p0) const {
  require(p0.size() == input_dim(), ErrorKind::ShapeMismatch,
          "gate input length " + std::to_string(p0.size()));
  GateTrace trace;
  std::vector<double> p(p0.begin(), p0.end());
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    trace.layer_inputs.push_back(p);
    const Mat& g = layers_[l];
    std::vector<double> next(g.rows());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) {
        acc += g(i, j) * p[j];
      }
      next[i] = silu(acc);
    }
    p = std::move(next);
  }
  trace.layer_inputs.push_back(p);
  double b = 0.0;
  const Mat& last = layers_.back();
  for (std::size_t j = 0; j < last.cols(); ++j) {
    b += last(0, j) * p[j];
  }
  trace.output = gate_fn(gate_, b);
  return trace;
}

std::vector<Mat> GatingModule::trace_batch(const Mat& p0) const {
  require(p0.cols() == input_dim(), ErrorKind::ShapeMismatch, "gate batch width");
  std::vector<Mat> inputs{p0};
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    Mat next = matmul_nt(inputs.back(), layers_[l]);
    for (double& v : next.data()) {
      v = silu(v);
    }
    inputs.push_back(std::move(next));
  }
  return inputs;
}

Mat GatingModule::forward_batch(const Mat& p0) const {
  const std::vector<Mat> inputs = trace_batch(p0);
  Mat b = matmul_nt(inputs.back(), layers_.back());
  for (double& v : b.data()) {
    v = gate_fn(gate_, v);
  }
  return b;
}

GatingModule init_new_gating(const GatingModule* prev, const SubspaceMemory& memory,
                             const GatingInitOptions& options, Rng& rng) {
  const std::vector<std::size_t> dims = options.shape.layer_inputs();
  require(memory.layers.empty() || memory.layers.size() == dims.size(), ErrorKind::DimMismatch,
          "memory has " + std::to_string(memory.layers.size()) + " layers, gate has " +
              std::to_string(dims.size()));
  for (std::size_t l = 0; l < memory.layers.size(); ++l) {
    require(memory.layers[l].dim() == dims[l], ErrorKind::DimMismatch,
            "memory layer " + std::to_string(l + 1) + " dimension");
  }

  std::vector<Mat> layers;
  const std::size_t hidden = options.shape.hidden.size();
  for (std::size_t l = 0; l < hidden; ++l) {
    const std::size_t out = options.shape.hidden[l];
    if (prev != nullptr) {
      require(prev->layers()[l].rows() == out && prev->layers()[l].cols() == dims[l],
              ErrorKind::DimMismatch, "previous gate shape differs");
      layers.push_back(prev->layers()[l]);
    } else {
      layers.push_back(gaussian_init(rng, out, dims[l], options.init_std));
    }
  }
  Mat last = gaussian_init(rng, 1, dims.back(), options.init_std);
  if (options.project_final && !memory.layers.empty()) {
    last = transpose(project_out(memory.layers.back(), transpose(last)));
  }
  layers.push_back(std::move(last));
  return GatingModule(std::move(layers), options.gate);
}

Mat constrain_update(const Mat& delta, const SubspaceBasis& m) {
  require(delta.cols() == m.dim(), ErrorKind::DimMismatch,
          "update has " + std::to_string(delta.cols()) + " columns, basis dim " +
              std::to_string(m.dim()));
  if (m.empty()) {
    return delta;
  }
  return delta - matmul_nt(matmul(delta, m.basis()), m.basis());
}

void GatingBank::push(GatingModule module) {
  freeze_all();
  modules_.push_back(std::move(module));
}

void GatingBank::freeze_all() {
  for (auto& m : modules_) {
    m.freeze();
  }
}

}  // namespace gainlora
