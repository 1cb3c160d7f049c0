#pragma once

// Minimal reverse-mode differentiation over Mat values.
//
// A Tape owns every node created through it. Nodes are appended in
// evaluation order, so reverse creation order is a topological order and
// backward() visits each reachable node exactly once.

#include <cstddef>
#include <vector>

#include "gainlora/activation.hpp"
#include "gainlora/mat.hpp"

namespace gainlora {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  // Constant: never receives a gradient.
  Var input(Mat value);
  // Leaf whose gradient is accumulated by backward().
  Var param(Mat value);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var scale(Var a, double s);
  // Row i of x multiplied by s(i, 0); s is n x 1.
  Var row_scale(Var x, Var s);
  Var silu(Var x);
  Var sigmoid(Var x);
  Var abs(Var x);
  Var gate(Var x, GateFn f);
  // Mean over rows: n x m -> 1 x m.
  Var mean_rows(Var x);
  // Sum of squared entries -> 1 x 1.
  Var sum_squares(Var x);
  // Mean softmax cross-entropy of logits (n x C) against labels -> 1 x 1.
  Var softmax_cross_entropy(Var logits, std::vector<std::size_t> labels);

  // Requires a 1 x 1 loss; throws NonScalarLoss otherwise.
  void backward(Var loss);

  [[nodiscard]] const Mat& value(Var v) const { return nodes_[v.id].value; }
  // Zero matrix of the value's shape when no gradient reached the node.
  [[nodiscard]] const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  [[nodiscard]] double scalar(Var v) const;
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

 private:
  enum class Op {
    Input,
    Param,
    MatMul,
    Transpose,
    Add,
    Scale,
    RowScale,
    Silu,
    Sigmoid,
    Abs,
    Gate,
    MeanRows,
    SumSquares,
    SoftmaxCE,
  };

  struct Node {
    Op op = Op::Input;
    Mat value;
    Mat grad;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
    double factor = 0.0;
    GateFn gate = GateFn::AbsSigmoid;
    std::vector<std::size_t> labels;
    Mat aux;  // softmax probabilities
    bool needs_grad = false;
  };

  Var push(Node node);
  bool needs(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, const Mat& g);

  std::vector<Node> nodes_;
};

}  // namespace gainlora
