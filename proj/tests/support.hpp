#pragma once

// Shared helpers for unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gainlora/autodiff.hpp"
#include "gainlora/backbone.hpp"
#include "gainlora/config.hpp"
#include "gainlora/continual.hpp"
#include "gainlora/mat.hpp"
#include "gainlora/rng.hpp"

namespace testing {

using namespace gainlora;

inline Mat random_mat(Rng& rng, std::size_t rows, std::size_t cols, double std = 1.0) {
  return gaussian_init(rng, rows, cols, std);
}

inline Mat random_symmetric(Rng& rng, std::size_t n) {
  const Mat a = random_mat(rng, n, n);
  return 0.5 * (a + transpose(a));
}

// Loss built on a tape from the given parameter values.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Largest ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12) over
// all parameters, with central differences of step h.
inline double gradient_error(const LossBuilder& build, const std::vector<Mat>& params,
                             double h = 1e-5) {
  Tape tape;
  std::vector<Var> vars;
  for (const Mat& p : params) vars.push_back(tape.param(p));
  const Var loss = build(tape, vars);
  tape.backward(loss);

  auto eval = [&](const std::vector<Mat>& values) {
    Tape t;
    std::vector<Var> v;
    for (const Mat& p : values) v.push_back(t.param(p));
    return t.scalar(build(t, v));
  };

  double worst = 0.0;
  std::vector<Mat> probe = params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Mat& analytic = tape.grad(vars[k]);
    Mat numeric(params[k].rows(), params[k].cols());
    for (std::size_t e = 0; e < params[k].size(); ++e) {
      const double x = params[k].data()[e];
      probe[k].data()[e] = x + h;
      const double up = eval(probe);
      probe[k].data()[e] = x - h;
      const double down = eval(probe);
      probe[k].data()[e] = x;
      numeric.data()[e] = (up - down) / (2.0 * h);
    }
    const double diff = std::sqrt(frobenius_sq(analytic - numeric));
    const double scale = std::max({std::sqrt(frobenius_sq(analytic)),
                                   std::sqrt(frobenius_sq(numeric)), 1e-12});
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

// Small suite + backbone for fast end-to-end tests.
inline ExperimentConfig small_config(std::size_t tasks = 3, std::size_t n_train = 120,
                                     std::size_t n_test = 60, std::size_t epochs = 5) {
  ExperimentConfig c;
  c.suite.tasks = tasks;
  c.suite.n_train = n_train;
  c.suite.n_test = n_test;
  c.strategy.epochs = epochs;
  c.model.classes = tasks * c.suite.classes_per_task;
  return c;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace testing
