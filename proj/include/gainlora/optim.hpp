#pragma once

#include <cstdint>

#include "gainlora/mat.hpp"

namespace gainlora {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Moment state for one parameter tensor. propose() returns the update
// Delta = -lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta) without
// applying it, so callers can constrain Delta first.
class AdamWSlot {
 public:
  AdamWSlot() = default;
  AdamWSlot(std::size_t rows, std::size_t cols) : m_(rows, cols), v_(rows, cols) {}

  Mat propose(const AdamWOptions& opt, const Mat& param, const Mat& grad);
  [[nodiscard]] std::int64_t steps() const noexcept { return steps_; }

 private:
  Mat m_;
  Mat v_;
  std::int64_t steps_ = 0;
};

}  // namespace gainlora
