#pragma once

// Gradient projection memory: orthonormal bases of the input subspaces seen
// by earlier tasks, grown task by task from collected layer inputs.

#include <cstddef>
#include <span>
#include <vector>

#include "gainlora/mat.hpp"

namespace gainlora {

class SubspaceBasis {
 public:
  SubspaceBasis() = default;
  // Empty basis (k = 0) of R^dim.
  explicit SubspaceBasis(std::size_t dim);
  // Takes ownership of dim x k orthonormal columns; throws DimMismatch if
  // ||B^T B - I||_max > 1e-6 or k > dim.
  explicit SubspaceBasis(Mat basis);

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t rank() const noexcept { return basis_.cols(); }
  [[nodiscard]] const Mat& basis() const noexcept { return basis_; }
  [[nodiscard]] bool empty() const noexcept { return rank() == 0; }

  bool operator==(const SubspaceBasis&) const = default;

 private:
  std::size_t dim_ = 0;
  Mat basis_;
};

// ||B^T B - I||_max
double orthonormality_error(const SubspaceBasis& m);

// X - M M^T X, X of shape dim x n.
Mat project_out(const SubspaceBasis& m, const Mat& x);

// Minimal u with sum(eigs[0..u)) + captured_sq >= eps * total_sq.
// eigs must be descending; small negatives are treated as zero.
std::size_t choose_rank(std::span<const double> eigs, double captured_sq, double total_sq,
                        double eps);

// Eigenvalues below this fraction of the largest are dropped before
// choose_rank.
inline constexpr double kRelativeEigenFloor = 1e-12;

// Appends the top eigenvectors of (H - M M^T H)(H - M M^T H)^T that the
// energy threshold eps admits. H is dim x n, one input per column.
SubspaceBasis extend(const SubspaceBasis& m, const Mat& h, double eps);

// Default energy threshold and per-task sample cap for H.
inline constexpr double kDefaultEpsTh = 0.99;
inline constexpr std::size_t kDefaultCollectSamples = 512;

struct SubspaceMemory {
  double eps_th = kDefaultEpsTh;
  std::vector<SubspaceBasis> layers;

  SubspaceMemory() = default;
  SubspaceMemory(std::span<const std::size_t> layer_dims, double eps);

  // layer_inputs[l] holds one input per row (n x dim_l).
  void extend_all(std::span<const Mat> layer_inputs);

  bool operator==(const SubspaceMemory&) const = default;
};

}  // namespace gainlora
