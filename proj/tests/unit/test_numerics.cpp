#include <doctest.h>

#include <cmath>
#include <numeric>

#include "gainlora/eig.hpp"
#include "gainlora/error.hpp"
#include "gainlora/kernels.hpp"
#include "gainlora/optim.hpp"
#include "support.hpp"

using namespace gainlora;
using testing::random_mat;

namespace {

Mat naive_product(const Mat& a, const Mat& b) {
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

}  // namespace

TEST_CASE("mat shapes and elementwise ops") {
  const Mat a = Mat::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  CHECK(transpose(a)(2, 1) == 6);
  CHECK(matmul(a, transpose(a)) == Mat::from_rows({{14, 32}, {32, 77}}));
  CHECK(matmul_tn(a, a) == matmul(transpose(a), a));
  CHECK(matmul_nt(a, a) == matmul(a, transpose(a)));
  CHECK(max_abs(a - a) == 0.0);
  CHECK(frobenius_sq(a) == 91.0);
  CHECK_THROWS_AS(matmul(a, a), Error);
  CHECK(hcat(a, a).cols() == 6);
  const std::vector<std::size_t> idx{1, 1};
  CHECK(gather_rows(a, idx) == Mat::from_rows({{4, 5, 6}, {4, 5, 6}}));
}

TEST_CASE("serial and parallel kernels agree bit for bit") {
  Rng rng(11);
  using kernels::Trans;
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 3, 5}, {64, 80, 33},
                         {150, 129, 140}, {300, 64, 257}}) {
    for (Trans ta : {Trans::No, Trans::Yes}) {
      for (Trans tb : {Trans::No, Trans::Yes}) {
        const Mat a = ta == Trans::No ? random_mat(rng, m, k) : random_mat(rng, k, m);
        const Mat b = tb == Trans::No ? random_mat(rng, k, n) : random_mat(rng, n, k);
        const Mat s = kernels::serial::gemm(a, ta, b, tb);
        const Mat p = kernels::parallel::gemm(a, ta, b, tb);
        CHECK(s == p);
        const Mat ref = naive_product(ta == Trans::No ? a : transpose(a),
                                      tb == Trans::No ? b : transpose(b));
        CHECK(s == ref);
      }
    }
    const Mat h = random_mat(rng, m, n);
    const Mat gs = kernels::serial::gram(h);
    CHECK(gs == kernels::parallel::gram(h));
    CHECK(gs == transpose(gs));
    CHECK(gs == naive_product(h, transpose(h)));
  }
}

TEST_CASE("rng determinism and gaussian init") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng::derive(1, 2).next_u64() != Rng::derive(1, 3).next_u64());

  Rng r1(5);
  Rng r2(5);
  CHECK(gaussian_init(r1, 4, 3, 0.02) == gaussian_init(r2, 4, 3, 0.02));

  Rng r(9);
  const Mat g = gaussian_init(r, 100, 100, 0.02);
  const double mean = std::accumulate(g.data().begin(), g.data().end(), 0.0) / 1e4;
  double var = 0.0;
  for (double v : g.data()) var += (v - mean) * (v - mean);
  CHECK(std::abs(std::sqrt(var / (1e4 - 1)) - 0.02) <= 0.002);

  const Mat empty = gaussian_init(r, 0, 5, 1.0);
  CHECK(empty.rows() == 0);
  CHECK(empty.size() == 0);
  CHECK_THROWS_AS(gaussian_init(r, 2, 2, 0.0), Error);

  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.index(7) < 7);
  }
}

TEST_CASE("sym_eig examples") {
  const SymEig d = sym_eig(Mat::from_rows({{4, 0}, {0, 1}}));
  CHECK(d.values[0] == doctest::Approx(4.0));
  CHECK(d.values[1] == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(1, 1)) == doctest::Approx(1.0));

  const SymEig e = sym_eig(Mat::from_rows({{2, 1}, {1, 2}}));
  CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(sym_eig(Mat::from_rows({{1, 2}, {0, 1}})), Error);
  CHECK_THROWS_AS(sym_eig(Mat::from_rows({{1, NAN}, {NAN, 1}})), Error);
  CHECK_THROWS_AS(sym_eig(Mat(2, 3)), Error);
}

TEST_CASE("sym_eig reconstruction and orthonormality up to 256") {
  Rng rng(3);
  for (std::size_t n : {1, 2, 5, 17, 64, 128, 256}) {
    const Mat s = testing::random_symmetric(rng, n);
    const SymEig e = sym_eig(s);
    Mat lambda(n, n);
    for (std::size_t i = 0; i < n; ++i) lambda(i, i) = e.values[i];
    const Mat rec = matmul(matmul(e.vectors, lambda), transpose(e.vectors));
    CHECK(max_abs_diff(rec, s) <= 1e-8);
    CHECK(max_abs_diff(matmul_tn(e.vectors, e.vectors), Mat::identity(n)) <= 1e-8);
    CHECK(std::is_sorted(e.values.rbegin(), e.values.rend()));
  }
}

TEST_CASE("closed-form derivatives") {
  Tape t;
  const Var b = t.param(Mat(1, 1, 0.0));
  t.backward(t.sigmoid(b));
  CHECK(t.grad(b)(0, 0) == doctest::Approx(0.25).epsilon(1e-15));

  Tape u;
  const Var x = u.param(Mat(1, 1, 0.0));
  u.backward(u.silu(x));
  CHECK(u.grad(x)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));

  Tape w;
  const Var m = w.param(Mat(2, 2, 1.0));
  CHECK_THROWS_AS(w.backward(m), Error);
}

TEST_CASE("finite-difference checks for every op") {
  Rng rng(17);
  auto away_from = [&](Mat m, double kink, double margin) {
    for (double& v : m.data()) {
      if (std::abs(std::abs(v) - kink) < margin) v += v >= 0 ? 2 * margin : -2 * margin;
    }
    return m;
  };
  const Mat probe = random_mat(rng, 4, 1);
  // Reduce a matrix output to a scalar with a fixed random weighting.
  auto reduce = [&](Tape& t, Var y) {
    const Mat& v = t.value(y);
    Rng local(v.rows() * 131 + v.cols());
    const Var weights = t.input(random_mat(local, v.cols(), 1));
    return t.sum_squares(t.matmul(y, weights));
  };
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.index(4);
    const std::size_t m = 2 + rng.index(4);
    const std::size_t k = 1 + rng.index(4);
    const Mat a = random_mat(rng, n, m);
    const Mat b = random_mat(rng, m, k);
    const Mat c = random_mat(rng, n, m);
    const Mat s = random_mat(rng, n, 1);

    using testing::gradient_error;
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.matmul(v[0], v[1])); }, {a, b}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.transpose(v[0])); }, {a}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.add(v[0], v[1])); }, {a, c}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.scale(v[0], -1.7)); }, {a}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.row_scale(v[0], v[1])); }, {a, s}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.silu(v[0])); }, {a}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.sigmoid(v[0])); }, {a}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.abs(v[0])); }, {away_from(a, 0.0, 1e-3)}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.mean_rows(v[0])); }, {a}) <= 1e-4);
    CHECK(gradient_error([&](Tape& t, auto& v) { return t.sum_squares(v[0]); }, {a}) <= 1e-4);

    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.index(m);
    CHECK(gradient_error([&](Tape& t, auto& v) { return t.softmax_cross_entropy(v[0], labels); }, {a}) <= 1e-4);

    Mat gate_in = away_from(away_from(0.8 * a, 0.0, 1e-3), 1.0, 1e-3);
    for (double& v : gate_in.data()) v = std::clamp(v, -1.9, 1.9);
    for (GateFn f : {GateFn::AbsSigmoid, GateFn::ClampAbs, GateFn::AbsSine, GateFn::Sigmoid}) {
      CHECK(gradient_error([&](Tape& t, auto& v) { return reduce(t, t.gate(v[0], f)); }, {gate_in}) <= 1e-4);
    }
  }
  (void)probe;
}

TEST_CASE("AdamW first step and weight decay") {
  AdamWOptions opt;
  AdamWSlot slot;
  const Mat p = Mat::from_rows({{1.0, -2.0}});
  const Mat g = Mat::from_rows({{0.5, -3.0}});
  const Mat d = slot.propose(opt, p, g);
  // Bias-corrected first step moves by lr * sign(g) (up to eps) plus decay.
  CHECK(d(0, 0) == doctest::Approx(-1e-3 * (1.0 + 0.01 * 1.0)).epsilon(1e-6));
  CHECK(d(0, 1) == doctest::Approx(-1e-3 * (-1.0 + 0.01 * -2.0)).epsilon(1e-6));
  CHECK(slot.steps() == 1);
  CHECK_THROWS_AS(slot.propose(opt, p, Mat(2, 2)), Error);
}
