#include "gainlora/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gainlora/eig.hpp"
#include "gainlora/error.hpp"
#include "gainlora/kernels.hpp"

namespace gainlora {

SubspaceBasis::SubspaceBasis(std::size_t dim) : dim_(dim), basis_(dim, 0) {}

SubspaceBasis::SubspaceBasis(Mat basis) : dim_(basis.rows()), basis_(std::move(basis)) {
  require(basis_.cols() <= dim_, ErrorKind::DimMismatch, "more basis columns than dimensions");
  require(orthonormality_error(*this) <= 1e-6, ErrorKind::DimMismatch,
          "basis columns are not orthonormal");
}

double orthonormality_error(const SubspaceBasis& m) {
  if (m.empty()) {
    return 0.0;
  }
  Mat g = matmul_tn(m.basis(), m.basis());
  g -= Mat::identity(g.rows());
  return max_abs(g);
}

Mat project_out(const SubspaceBasis& m, const Mat& x) {
  require(x.rows() == m.dim(), ErrorKind::DimMismatch,
          "input has " + std::to_string(x.rows()) + " rows, basis dim " + std::to_string(m.dim()));
  if (m.empty()) {
    return x;
  }
  const Mat coeff = matmul_tn(m.basis(), x);
  return x - matmul(m.basis(), coeff);
}

std::size_t choose_rank(std::span<const double> eigs, double captured_sq, double total_sq,
                        double eps) {
  require(eps > 0.0 && eps <= 1.0, ErrorKind::ConfigError, "eps_th must lie in (0, 1]");
  const double target = eps * total_sq;
  double acc = captured_sq;
  if (acc >= target) {
    return 0;
  }
  for (std::size_t u = 0; u < eigs.size(); ++u) {
    acc += std::max(eigs[u], 0.0);
    if (acc >= target) {
      return u + 1;
    }
  }
  // Rounding can leave the full sum a hair below eps * total when eps = 1.
  const double slack = 1e-9 * std::max(total_sq, 1e-300);
  require(acc + slack >= target, ErrorKind::ThresholdUnreachable,
          "captured " + std::to_string(acc) + " < " + std::to_string(target));
  return eigs.size();
}

namespace {

// Modified Gram-Schmidt of `candidate` against `existing` columns and the
// already accepted new columns. Returns false if nothing is left.
bool orthonormalize_against(const Mat& existing, std::vector<std::vector<double>>& accepted,
                            std::vector<double>& candidate) {
  const std::size_t dim = candidate.size();
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t c = 0; c < existing.cols(); ++c) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += existing(i, c) * candidate[i];
      for (std::size_t i = 0; i < dim; ++i) candidate[i] -= dot * existing(i, c);
    }
    for (const auto& q : accepted) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += q[i] * candidate[i];
      for (std::size_t i = 0; i < dim; ++i) candidate[i] -= dot * q[i];
    }
  }
  double norm_sq = 0.0;
  for (double v : candidate) norm_sq += v * v;
  if (norm_sq < 1e-20) {
    return false;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : candidate) v *= inv;
  return true;
}

}  // namespace

SubspaceBasis extend(const SubspaceBasis& m, const Mat& h, double eps) {
  require(h.rows() == m.dim(), ErrorKind::DimMismatch,
          "H has " + std::to_string(h.rows()) + " rows, basis dim " + std::to_string(m.dim()));
  require(eps > 0.0 && eps <= 1.0, ErrorKind::ConfigError, "eps_th must lie in (0, 1]");
  require(all_finite(h), ErrorKind::NonFinite, "subspace input H");
  if (h.cols() == 0 || m.rank() == m.dim()) {
    return m;
  }

  const Mat residual = project_out(m, h);
  const double total_sq = frobenius_sq(h);
  const double captured_sq = m.empty() ? 0.0 : frobenius_sq(matmul(m.basis(), matmul_tn(m.basis(), h)));

  const SymEig eig = sym_eig(kernels::gram(residual));
  const double largest = eig.values.empty() ? 0.0 : std::max(eig.values.front(), 0.0);
  std::vector<double> kept;
  for (double v : eig.values) {
    if (largest > 0.0 && v >= kRelativeEigenFloor * largest) {
      kept.push_back(v);
    }
  }

  const std::size_t u = choose_rank(kept, captured_sq, total_sq, eps);
  if (u == 0) {
    return m;
  }

  std::vector<std::vector<double>> accepted;
  for (std::size_t j = 0; j < u && m.rank() + accepted.size() < m.dim(); ++j) {
    std::vector<double> candidate = eig.vectors.col_vector(j);
    if (orthonormalize_against(m.basis(), accepted, candidate)) {
      accepted.push_back(std::move(candidate));
    }
  }

  Mat grown(m.dim(), m.rank() + accepted.size());
  for (std::size_t i = 0; i < m.dim(); ++i) {
    for (std::size_t c = 0; c < m.rank(); ++c) {
      grown(i, c) = m.basis()(i, c);
    }
    for (std::size_t c = 0; c < accepted.size(); ++c) {
      grown(i, m.rank() + c) = accepted[c][i];
    }
  }
  return SubspaceBasis(std::move(grown));
}

SubspaceMemory::SubspaceMemory(std::span<const std::size_t> layer_dims, double eps) : eps_th(eps) {
  require(eps > 0.0 && eps <= 1.0, ErrorKind::ConfigError, "eps_th must lie in (0, 1]");
  for (std::size_t d : layer_dims) {
    layers.emplace_back(d);
  }
}

void SubspaceMemory::extend_all(std::span<const Mat> layer_inputs) {
  require(layer_inputs.size() == layers.size(), ErrorKind::DimMismatch,
          "one input matrix per memory layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l] = extend(layers[l], transpose(layer_inputs[l]), eps_th);
  }
}

}  // namespace gainlora
