#include "gainlora/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gainlora/eig.hpp"
#include "gainlora/error.hpp"
#include "gainlora/kernels.hpp"

namespace gainlora {

LoraBranch& AdaptedLinear::expand(std::size_t rank, Rng& rng, double b_std) {
  require(rank >= 1 && rank <= std::min(d_in(), d_out()), ErrorKind::ShapeMismatch,
          "LoRA rank " + std::to_string(rank) + " invalid for " + std::to_string(d_out()) + "x" +
              std::to_string(d_in()));
  freeze_all();
  LoraBranch branch;
  branch.a = Mat(d_out(), rank);
  branch.b = gaussian_init(rng, rank, d_in(), b_std);
  branches_.push_back(std::move(branch));
  return branches_.back();
}

void AdaptedLinear::freeze_all() {
  for (auto& b : branches_) {
    b.freeze();
  }
}

Mat integrate(std::span<const LoraBranch> branches, std::span<const double> coeffs,
              std::size_t d_out, std::size_t d_in) {
  require(branches.size() == coeffs.size(), ErrorKind::ShapeMismatch,
          "one coefficient per branch");
  Mat w(d_out, d_in);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const LoraBranch& br = branches[i];
    require(br.a.rows() == d_out && br.b.cols() == d_in && br.a.cols() == br.b.rows(),
            ErrorKind::ShapeMismatch, "branch " + std::to_string(i + 1) + " shape");
    w += coeffs[i] * matmul(br.a, br.b);
  }
  return w;
}

std::vector<double> adapted_forward(const AdaptedLinear& layer, std::span<const double> coeffs,
                                    std::span<const double> h) {
  require(h.size() == layer.d_in(), ErrorKind::ShapeMismatch, "adapted input length");
  require(coeffs.size() == layer.branches().size(), ErrorKind::ShapeMismatch,
          "one coefficient per branch");
  const Mat x = Mat::column(h);
  Mat e = matmul(layer.weight(), x);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const LoraBranch& br = layer.branches()[i];
    e += coeffs[i] * matmul(br.a, matmul(br.b, x));
  }
  return e.col_vector(0);
}

double olora_penalty(std::span<const LoraBranch> branches, std::size_t t, double lambda) {
  require(t >= 1 && t <= branches.size(), ErrorKind::OrderViolation, "branch index out of range");
  const Mat& current = branches[t - 1].b;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < t; ++i) {
    total += frobenius_sq(matmul_nt(branches[i].b, current));
  }
  return lambda * total;
}

Mat inflora_design(const Mat& h_new, const SubspaceBasis& grad_space, std::size_t rank) {
  require(rank >= 1, ErrorKind::ShapeMismatch, "InfLoRA rank must be positive");
  require(h_new.rows() == grad_space.dim(), ErrorKind::DimMismatch, "InfLoRA input dimension");
  const std::size_t free_dims = grad_space.dim() - grad_space.rank();
  require(free_dims >= rank, ErrorKind::NoFreeSubspace,
          std::to_string(free_dims) + " free dimensions for rank " + std::to_string(rank));

  const Mat residual = project_out(grad_space, h_new);
  // Adding a tiny multiple of the complement projector keeps eigenvectors of
  // zero data variance out of span(M) when the new task has fewer than r
  // free directions.
  Mat cov = kernels::gram(residual);
  const Mat complement = project_out(grad_space, Mat::identity(grad_space.dim()));
  double trace = 0.0;
  for (std::size_t i = 0; i < cov.rows(); ++i) trace += cov(i, i);
  cov += (1e-12 * (trace + 1.0)) * complement;
  const SymEig eig = sym_eig(cov);

  Mat b(rank, h_new.rows());
  for (std::size_t r = 0; r < rank; ++r) {
    const Mat projected = project_out(grad_space, Mat::column(eig.vectors.col_vector(r)));
    std::vector<double> v = projected.col_vector(0);
    for (std::size_t k = 0; k < r; ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) dot += b(k, j) * v[j];
      for (std::size_t j = 0; j < v.size(); ++j) v[j] -= dot * b(k, j);
    }
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    require(norm_sq > 1e-20, ErrorKind::NoFreeSubspace, "designed row vanished");
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (std::size_t j = 0; j < v.size(); ++j) b(r, j) = v[j] * inv;
  }
  return b;
}

}  // namespace gainlora
