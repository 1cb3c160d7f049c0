#include <doctest.h>

#include "gainlora/adapter.hpp"
#include "gainlora/eig.hpp"
#include "gainlora/error.hpp"
#include "gainlora/kernels.hpp"
#include "support.hpp"

using namespace gainlora;
using testing::random_mat;

TEST_CASE("integrate examples") {
  const LoraBranch br{Mat::from_rows({{1}, {0}}), Mat::from_rows({{2, 0}}), true, true};
  const std::vector<LoraBranch> one{br};
  const std::vector<double> half{0.5};
  CHECK(integrate(one, half, 2, 2) == Mat::from_rows({{1, 0}, {0, 0}}));
  const std::vector<double> zero{0.0};
  CHECK(max_abs(integrate(one, zero, 2, 2)) == 0.0);
  CHECK(max_abs(integrate(std::span<const LoraBranch>{}, std::span<const double>{}, 2, 2)) == 0.0);
  CHECK_THROWS_AS(integrate(one, std::vector<double>{0.5, 0.5}, 2, 2), Error);
  CHECK_THROWS_AS(integrate(one, half, 3, 2), Error);
}

TEST_CASE("adapted forward agrees with integrate-then-multiply") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    AdaptedLinear layer(random_mat(rng, 5, 7));
    const std::vector<double> h = random_mat(rng, 7, 1).col_vector(0);
    const std::vector<double> plain = adapted_forward(layer, std::vector<double>{}, h);
    const std::vector<double> wh = matmul(layer.weight(), Mat::column(h)).col_vector(0);
    CHECK(plain == wh);

    std::vector<double> coeffs;
    for (int b = 0; b < 3; ++b) {
      // A = 0 at expansion leaves the output bit-identical.
      const std::vector<double> before = adapted_forward(layer, coeffs, h);
      layer.expand(2, rng);
      coeffs.push_back(rng.uniform());
      CHECK(adapted_forward(layer, coeffs, h) == before);
      layer.mutable_branches().back().a = random_mat(rng, 5, 2);
    }
    const Mat w = layer.weight() + integrate(layer.branches(), coeffs, 5, 7);
    const std::vector<double> ref = matmul(w, Mat::column(h)).col_vector(0);
    const std::vector<double> got = adapted_forward(layer, coeffs, h);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref[i]) <= 1e-12);
  }
}

TEST_CASE("expand freezes earlier branches") {
  Rng rng(1);
  AdaptedLinear layer(Mat(4, 6));
  LoraBranch& first = layer.expand(3, rng);
  CHECK(max_abs(first.a) == 0.0);
  CHECK(first.b.rows() == 3);
  CHECK(first.b.cols() == 6);
  CHECK_FALSE(first.frozen());
  layer.expand(3, rng);
  CHECK(layer.branches()[0].frozen());
  CHECK_FALSE(layer.branches()[1].frozen());
  CHECK_THROWS_AS(layer.expand(5, rng), Error);
}

TEST_CASE("olora penalty") {
  const LoraBranch e1{Mat(2, 1), Mat::from_rows({{1, 0}}), false, false};
  const LoraBranch e2{Mat(2, 1), Mat::from_rows({{0, 1}}), true, true};
  const std::vector<LoraBranch> same{e1, e1};
  const std::vector<LoraBranch> ortho{e1, e2};
  CHECK(olora_penalty(same, 1, 1.0) == 0.0);
  CHECK(olora_penalty(same, 2, 1.0) == 1.0);
  CHECK(olora_penalty(ortho, 2, 1.0) == 0.0);
  CHECK(olora_penalty(same, 2, 0.5) == 0.5);

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LoraBranch> bs;
    for (int i = 0; i < 3; ++i) bs.push_back(LoraBranch{Mat(3, 2), random_mat(rng, 2, 6), false, false});
    // Make the last branch orthogonal to the others half of the time.
    if (trial % 2 == 0) {
      const SubspaceBasis old = extend(SubspaceBasis(6), hcat(transpose(bs[0].b), transpose(bs[1].b)), 1.0);
      bs[2].b = transpose(project_out(old, transpose(bs[2].b)));
    }
    double brute = 0.0;
    for (int i = 0; i < 2; ++i) brute += frobenius_sq(matmul_nt(bs[i].b, bs[2].b));
    const double p = olora_penalty(bs, 3, 1.0);
    CHECK(p == doctest::Approx(brute).epsilon(1e-12));
    CHECK((p <= 1e-10) == (trial % 2 == 0));
  }
}

TEST_CASE("inflora design") {
  Rng rng(9);
  const std::size_t d = 10;
  const Mat h = random_mat(rng, d, 40);

  // Empty space: top principal directions of the inputs' second moment.
  const Mat b = inflora_design(h, SubspaceBasis(d), 3);
  CHECK(b.rows() == 3);
  CHECK(max_abs_diff(matmul_nt(b, b), Mat::identity(3)) <= 1e-10);
  const SymEig e = sym_eig(kernels::gram(h));
  for (std::size_t i = 0; i < 3; ++i) {
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += b(i, k) * e.vectors(k, i);
    CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-8));
  }

  const SubspaceBasis grad = extend(SubspaceBasis(d), random_mat(rng, d, 4), 1.0);
  const Mat b2 = inflora_design(h, grad, 4);
  CHECK(max_abs(matmul(b2, grad.basis())) <= 1e-8);
  CHECK(max_abs_diff(matmul_nt(b2, b2), Mat::identity(4)) <= 1e-10);

  // Inputs entirely inside the stored space still yield a valid design.
  const Mat inside = matmul(grad.basis(), random_mat(rng, 4, 12));
  const Mat b3 = inflora_design(inside, grad, 2);
  CHECK(max_abs(matmul(b3, grad.basis())) <= 1e-8);

  CHECK_THROWS_AS(inflora_design(h, SubspaceBasis(Mat::identity(d)), 1), Error);
  CHECK_THROWS_AS(inflora_design(h, grad, 7), Error);
}
