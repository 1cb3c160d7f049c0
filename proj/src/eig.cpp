#include "gainlora/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gainlora/error.hpp"

namespace gainlora {
namespace {

constexpr int kMaxSweeps = 100;

double off_diagonal_sq(const Mat& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      s += a(i, j) * a(i, j);
    }
  }
  return s;
}

// Applies the rotation that annihilates a(p,q) (Rutishauser's formulation).
void rotate(Mat& a, Mat& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);
  const std::size_t n = a.rows();

  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == p || k == q) {
      continue;
    }
    const double akp = a(k, p);
    const double akq = a(k, q);
    const double new_kp = akp - s * (akq + tau * akp);
    const double new_kq = akq + s * (akp - tau * akq);
    a(k, p) = new_kp;
    a(p, k) = new_kp;
    a(k, q) = new_kq;
    a(q, k) = new_kq;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = vkp - s * (vkq + tau * vkp);
    v(k, q) = vkq + s * (vkp - tau * vkq);
  }
}

}  // namespace

SymEig sym_eig(const Mat& s) {
  require(s.rows() == s.cols(), ErrorKind::ShapeMismatch, "sym_eig needs a square matrix");
  require(all_finite(s), ErrorKind::NonFinite, "sym_eig input");
  const std::size_t n = s.rows();
  const double scale = std::max(1.0, max_abs(s));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      require(std::abs(s(i, j) - s(j, i)) <= 1e-10 * scale, ErrorKind::NonSymmetric,
              "asymmetry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }

  Mat a = s;
  // Work on the exactly symmetrized copy.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }
  }
  Mat v = Mat::identity(n);

  const double total_sq = frobenius_sq(a);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const double off = off_diagonal_sq(a);
    if (off == 0.0 || off <= 1e-32 * total_sq) {
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) {
          continue;
        }
        // Skip rotations that cannot change the diagonal in float64.
        const double small = 1e-300 + 1e-18 * (std::abs(a(p, p)) + std::abs(a(q, q)));
        if (std::abs(apq) < small) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        rotate(a, v, p, q);
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymEig out{std::vector<double>(n), Mat(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) {
      out.vectors(k, j) = v(k, order[j]);
    }
  }
  return out;
}

}  // namespace gainlora
