#pragma once

// Expandable low-rank branches over a frozen linear weight:
//   e = (W + sum_i a_i A_i B_i) h

#include <cstddef>
#include <span>
#include <vector>

#include "gainlora/mat.hpp"
#include "gainlora/rng.hpp"
#include "gainlora/subspace.hpp"

namespace gainlora {

struct LoraBranch {
  Mat a;  // d_out x r, zero at creation
  Mat b;  // r x d_in
  bool train_a = true;
  bool train_b = true;

  [[nodiscard]] std::size_t rank() const noexcept { return b.rows(); }
  [[nodiscard]] bool frozen() const noexcept { return !train_a && !train_b; }
  void freeze() noexcept { train_a = train_b = false; }

  bool operator==(const LoraBranch&) const = default;
};

class AdaptedLinear {
 public:
  AdaptedLinear() = default;
  explicit AdaptedLinear(Mat weight) : weight_(std::move(weight)) {}

  [[nodiscard]] const Mat& weight() const noexcept { return weight_; }
  [[nodiscard]] std::size_t d_in() const noexcept { return weight_.cols(); }
  [[nodiscard]] std::size_t d_out() const noexcept { return weight_.rows(); }
  [[nodiscard]] const std::vector<LoraBranch>& branches() const noexcept { return branches_; }
  [[nodiscard]] std::vector<LoraBranch>& mutable_branches() noexcept { return branches_; }

  // Freezes every existing branch and appends A = 0, B ~ N(0, b_std^2).
  LoraBranch& expand(std::size_t rank, Rng& rng, double b_std = 0.02);
  void freeze_all();

  bool operator==(const AdaptedLinear&) const = default;

 private:
  Mat weight_;
  std::vector<LoraBranch> branches_;
};

// W_t = sum_i a_i A_i B_i; zero matrix of shape (d_out, d_in) for no branches.
Mat integrate(std::span<const LoraBranch> branches, std::span<const double> coeffs,
              std::size_t d_out, std::size_t d_in);

// W h + sum_i a_i A_i (B_i h)
std::vector<double> adapted_forward(const AdaptedLinear& layer, std::span<const double> coeffs,
                                    std::span<const double> h);

// lambda * sum_{i < t} ||B_i B_t^T||_F^2 with t the 1-based index of the
// current branch; 0 for t = 1.
double olora_penalty(std::span<const LoraBranch> branches, std::size_t t, double lambda);

// Rows: top-r principal directions of the new-task inputs after removing the
// old-task input subspace. h_new is d_in x n.
Mat inflora_design(const Mat& h_new, const SubspaceBasis& grad_space, std::size_t rank);

}  // namespace gainlora
