#include "gainlora/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gainlora/error.hpp"

namespace gainlora {

std::string_view to_string(GateFn f) {
  switch (f) {
    case GateFn::AbsSigmoid: return "abs_sigmoid";
    case GateFn::ClampAbs: return "clamp_abs";
    case GateFn::AbsSine: return "abs_sine";
    case GateFn::Sigmoid: return "sigmoid";
  }
  return "abs_sigmoid";
}

GateFn parse_gate_fn(std::string_view name) {
  if (name == "abs_sigmoid") return GateFn::AbsSigmoid;
  if (name == "clamp_abs") return GateFn::ClampAbs;
  if (name == "abs_sine") return GateFn::AbsSine;
  if (name == "sigmoid") return GateFn::Sigmoid;
  throw Error(ErrorKind::ConfigError, "unknown gate function '" + std::string(name) + "'");
}

Var Tape::push(Node node) {
  require(all_finite(node.value), ErrorKind::NonFinite, "tape value");
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::input(Mat value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Mat value) {
  Node n;
  n.op = Op::Param;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::MatMul;
  n.value = gainlora::matmul(value(a), value(b));
  n.lhs = a.id;
  n.rhs = b.id;
  n.needs_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::Transpose;
  n.value = gainlora::transpose(value(a));
  n.lhs = a.id;
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::Add;
  n.value = value(a) + value(b);
  n.lhs = a.id;
  n.rhs = b.id;
  n.needs_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::Scale;
  n.value = s * value(a);
  n.lhs = a.id;
  n.factor = s;
  n.needs_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::row_scale(Var x, Var s) {
  const Mat& xv = value(x);
  const Mat& sv = value(s);
  require(sv.cols() == 1 && sv.rows() == xv.rows(), ErrorKind::ShapeMismatch,
          "row_scale needs an n x 1 scale for n rows");
  Node n;
  n.op = Op::RowScale;
  n.value = xv;
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    for (double& v : n.value.row_span(i)) {
      v *= sv(i, 0);
    }
  }
  n.lhs = x.id;
  n.rhs = s.id;
  n.needs_grad = needs(x.id) || needs(s.id);
  return push(std::move(n));
}

namespace {

template <typename F>
Mat map(const Mat& x, F f) {
  Mat y = x;
  for (double& v : y.data()) {
    v = f(v);
  }
  return y;
}

}  // namespace

Var Tape::silu(Var x) {
  Node n;
  n.op = Op::Silu;
  n.value = map(value(x), [](double v) { return gainlora::silu(v); });
  n.lhs = x.id;
  n.needs_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::sigmoid(Var x) {
  Node n;
  n.op = Op::Sigmoid;
  n.value = map(value(x), [](double v) { return gainlora::sigmoid(v); });
  n.lhs = x.id;
  n.needs_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::abs(Var x) {
  Node n;
  n.op = Op::Abs;
  n.value = map(value(x), [](double v) { return std::abs(v); });
  n.lhs = x.id;
  n.needs_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::gate(Var x, GateFn f) {
  Node n;
  n.op = Op::Gate;
  n.value = map(value(x), [f](double v) { return gate_value(f, v); });
  n.lhs = x.id;
  n.gate = f;
  n.needs_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::mean_rows(Var x) {
  const Mat& xv = value(x);
  require(xv.rows() > 0, ErrorKind::EmptyInput, "mean_rows of an empty matrix");
  Node n;
  n.op = Op::MeanRows;
  n.value = Mat(1, xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    for (std::size_t j = 0; j < xv.cols(); ++j) {
      n.value(0, j) += xv(i, j);
    }
  }
  for (double& v : n.value.data()) {
    v /= static_cast<double>(xv.rows());
  }
  n.lhs = x.id;
  n.needs_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::sum_squares(Var x) {
  Node n;
  n.op = Op::SumSquares;
  n.value = Mat(1, 1, frobenius_sq(value(x)));
  n.lhs = x.id;
  n.needs_grad = needs(x.id);
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::vector<std::size_t> labels) {
  const Mat& z = value(logits);
  require(z.rows() == labels.size() && !labels.empty(), ErrorKind::ShapeMismatch,
          "cross-entropy needs one label per logit row");
  Node n;
  n.op = Op::SoftmaxCE;
  n.aux = Mat(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    require(labels[i] < z.cols(), ErrorKind::IdOutOfRange,
            "label " + std::to_string(labels[i]) + " >= class count");
    const auto row = z.row_span(i);
    const double zmax = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      const double e = std::exp(row[j] - zmax);
      n.aux(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < z.cols(); ++j) {
      n.aux(i, j) /= denom;
    }
    loss += std::log(denom) + zmax - row[labels[i]];
  }
  n.value = Mat(1, 1, loss / static_cast<double>(z.rows()));
  n.lhs = logits.id;
  n.labels = std::move(labels);
  n.needs_grad = needs(logits.id);
  return push(std::move(n));
}

double Tape::scalar(Var v) const {
  const Mat& m = value(v);
  require(m.rows() == 1 && m.cols() == 1, ErrorKind::NonScalarLoss, "value is not 1 x 1");
  return m(0, 0);
}

void Tape::accumulate(std::size_t id, const Mat& g) {
  if (!nodes_[id].needs_grad) {
    return;
  }
  nodes_[id].grad += g;
}

void Tape::backward(Var loss) {
  require(value(loss).rows() == 1 && value(loss).cols() == 1, ErrorKind::NonScalarLoss,
          "backward needs a 1 x 1 loss");
  for (Node& n : nodes_) {
    n.grad = Mat(n.value.rows(), n.value.cols());
  }
  nodes_[loss.id].grad(0, 0) = 1.0;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad) {
      continue;
    }
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::Input:
      case Op::Param:
        break;
      case Op::MatMul: {
        if (needs(n.lhs)) accumulate(n.lhs, matmul_nt(g, nodes_[n.rhs].value));
        if (needs(n.rhs)) accumulate(n.rhs, matmul_tn(nodes_[n.lhs].value, g));
        break;
      }
      case Op::Transpose:
        accumulate(n.lhs, gainlora::transpose(g));
        break;
      case Op::Add:
        accumulate(n.lhs, g);
        accumulate(n.rhs, g);
        break;
      case Op::Scale:
        accumulate(n.lhs, n.factor * g);
        break;
      case Op::RowScale: {
        const Mat& x = nodes_[n.lhs].value;
        const Mat& s = nodes_[n.rhs].value;
        if (needs(n.lhs)) {
          Mat dx = g;
          for (std::size_t i = 0; i < dx.rows(); ++i) {
            for (double& v : dx.row_span(i)) {
              v *= s(i, 0);
            }
          }
          accumulate(n.lhs, dx);
        }
        if (needs(n.rhs)) {
          Mat ds(s.rows(), 1);
          for (std::size_t i = 0; i < x.rows(); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < x.cols(); ++j) {
              acc += g(i, j) * x(i, j);
            }
            ds(i, 0) = acc;
          }
          accumulate(n.rhs, ds);
        }
        break;
      }
      case Op::Silu: {
        const Mat& x = nodes_[n.lhs].value;
        Mat dx = g;
        for (std::size_t k = 0; k < dx.size(); ++k) {
          dx.data()[k] *= silu_derivative(x.data()[k]);
        }
        accumulate(n.lhs, dx);
        break;
      }
      case Op::Sigmoid: {
        Mat dx = g;
        for (std::size_t k = 0; k < dx.size(); ++k) {
          const double s = n.value.data()[k];
          dx.data()[k] *= s * (1.0 - s);
        }
        accumulate(n.lhs, dx);
        break;
      }
      case Op::Abs: {
        const Mat& x = nodes_[n.lhs].value;
        Mat dx = g;
        for (std::size_t k = 0; k < dx.size(); ++k) {
          const double v = x.data()[k];
          dx.data()[k] *= v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
        accumulate(n.lhs, dx);
        break;
      }
      case Op::Gate: {
        const Mat& x = nodes_[n.lhs].value;
        Mat dx = g;
        for (std::size_t k = 0; k < dx.size(); ++k) {
          dx.data()[k] *= gate_derivative(n.gate, x.data()[k]);
        }
        accumulate(n.lhs, dx);
        break;
      }
      case Op::MeanRows: {
        const Mat& x = nodes_[n.lhs].value;
        Mat dx(x.rows(), x.cols());
        const double inv = 1.0 / static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
          for (std::size_t j = 0; j < x.cols(); ++j) {
            dx(i, j) = g(0, j) * inv;
          }
        }
        accumulate(n.lhs, dx);
        break;
      }
      case Op::SumSquares:
        accumulate(n.lhs, (2.0 * g(0, 0)) * nodes_[n.lhs].value);
        break;
      case Op::SoftmaxCE: {
        Mat dz = n.aux;
        const double inv = g(0, 0) / static_cast<double>(dz.rows());
        for (std::size_t i = 0; i < dz.rows(); ++i) {
          dz(i, n.labels[i]) -= 1.0;
          for (double& v : dz.row_span(i)) {
            v *= inv;
          }
        }
        accumulate(n.lhs, dz);
        break;
      }
    }
  }
}

}  // namespace gainlora
