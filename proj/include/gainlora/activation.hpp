#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

namespace gainlora {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double silu(double x) { return x * sigmoid(x); }

inline double silu_derivative(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// Final map of a gating module. AbsSigmoid, ClampAbs and AbsSine send 0 to 0;
// Sigmoid is kept only for the ablation that drops the initialization
// constraint.
enum class GateFn { AbsSigmoid, ClampAbs, AbsSine, Sigmoid };

std::string_view to_string(GateFn f);
GateFn parse_gate_fn(std::string_view name);

inline double gate_value(GateFn f, double b) {
  switch (f) {
    // |2 sigmoid(b) - 1| = tanh(|b| / 2); the tanh form is exactly even.
    case GateFn::AbsSigmoid: return std::tanh(std::abs(b) / 2.0);
    case GateFn::ClampAbs: return std::min(std::abs(b), 1.0);
    case GateFn::AbsSine: return std::abs(std::sin(std::numbers::pi * b / 2.0));
    case GateFn::Sigmoid: return sigmoid(b);
  }
  return 0.0;
}

// Derivative with the subgradient 0 at kinks.
inline double gate_derivative(GateFn f, double b) {
  const auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  switch (f) {
    case GateFn::AbsSigmoid: {
      const double t = std::tanh(std::abs(b) / 2.0);
      return sign(b) * 0.5 * (1.0 - t * t);
    }
    case GateFn::ClampAbs: return std::abs(b) < 1.0 ? sign(b) : 0.0;
    case GateFn::AbsSine: {
      const double arg = std::numbers::pi * b / 2.0;
      return sign(std::sin(arg)) * std::numbers::pi / 2.0 * std::cos(arg);
    }
    case GateFn::Sigmoid: {
      const double s = sigmoid(b);
      return s * (1.0 - s);
    }
  }
  return 0.0;
}

}  // namespace gainlora
