#include "gainlora/optim.hpp"

#include <cmath>

#include "gainlora/error.hpp"

namespace gainlora {

Mat AdamWSlot::propose(const AdamWOptions& opt, const Mat& param, const Mat& grad) {
  require(param.same_shape(grad), ErrorKind::ShapeMismatch, "AdamW grad shape");
  if (!m_.same_shape(param)) {
    m_ = Mat(param.rows(), param.cols());
    v_ = Mat(param.rows(), param.cols());
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(steps_));
  Mat delta(param.rows(), param.cols());
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad.data()[k];
    double& m = m_.data()[k];
    double& v = v_.data()[k];
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    delta.data()[k] =
        -opt.lr * (m_hat / (std::sqrt(v_hat) + opt.eps) + opt.weight_decay * param.data()[k]);
  }
  return delta;
}

}  // namespace gainlora
