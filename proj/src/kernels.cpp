#include "gainlora/kernels.hpp"

#include <string>

#include "gainlora/error.hpp"

namespace gainlora::kernels {
namespace {

struct GemmShape {
  std::size_t m, k, n;
};

GemmShape check_shapes(const Mat& a, Trans ta, const Mat& b, Trans tb) {
  const std::size_t m = ta == Trans::No ? a.rows() : a.cols();
  const std::size_t ka = ta == Trans::No ? a.cols() : a.rows();
  const std::size_t kb = tb == Trans::No ? b.rows() : b.cols();
  const std::size_t n = tb == Trans::No ? b.cols() : b.rows();
  require(ka == kb, ErrorKind::ShapeMismatch,
          "gemm inner dimensions " + std::to_string(ka) + " vs " + std::to_string(kb));
  return {m, ka, n};
}

// One output row. Shared by both flavours so the accumulation order is fixed.
template <bool TA, bool TB>
void gemm_row_impl(const Mat& a, const Mat& b, std::size_t i, std::size_t k, std::size_t n,
                   double* out) {
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  const std::size_t lda = a.cols();
  const std::size_t ldb = b.cols();
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = TA ? ad[p * lda + i] : ad[i * lda + p];
      const double bv = TB ? bd[j * ldb + p] : bd[p * ldb + j];
      acc += av * bv;
    }
    out[j] = acc;
  }
}

inline void gemm_row(const Mat& a, Trans ta, const Mat& b, Trans tb, std::size_t i,
                     std::size_t k, std::size_t n, double* out) {
  const bool at = ta == Trans::Yes;
  const bool bt = tb == Trans::Yes;
  if (!at && !bt) {
    gemm_row_impl<false, false>(a, b, i, k, n, out);
  } else if (!at && bt) {
    gemm_row_impl<false, true>(a, b, i, k, n, out);
  } else if (at && !bt) {
    gemm_row_impl<true, false>(a, b, i, k, n, out);
  } else {
    gemm_row_impl<true, true>(a, b, i, k, n, out);
  }
}

inline void gram_row(const Mat& h, std::size_t i, Mat& out) {
  const std::size_t n = h.cols();
  const double* hi = h.row_span(i).data();
  for (std::size_t j = 0; j <= i; ++j) {
    const double* hj = h.row_span(j).data();
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      acc += hi[p] * hj[p];
    }
    out(i, j) = acc;
  }
}

void mirror_lower(Mat& g) {
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = i + 1; j < g.cols(); ++j) {
      g(i, j) = g(j, i);
    }
  }
}

}  // namespace

namespace serial {

Mat gemm(const Mat& a, Trans ta, const Mat& b, Trans tb) {
  const auto [m, k, n] = check_shapes(a, ta, b, tb);
  Mat c(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    gemm_row(a, ta, b, tb, i, k, n, c.row_span(i).data());
  }
  return c;
}

Mat gram(const Mat& h) {
  Mat g(h.rows(), h.rows());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    gram_row(h, i, g);
  }
  mirror_lower(g);
  return g;
}

}  // namespace serial

namespace parallel {

Mat gemm(const Mat& a, Trans ta, const Mat& b, Trans tb) {
  const auto [m, k, n] = check_shapes(a, ta, b, tb);
  Mat c(m, n);
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i) {
    const auto row = static_cast<std::size_t>(i);
    gemm_row(a, ta, b, tb, row, k, n, c.row_span(row).data());
  }
  return c;
}

Mat gram(const Mat& h) {
  Mat g(h.rows(), h.rows());
  const auto rows = static_cast<long long>(h.rows());
  // Row i costs O(i); dynamic scheduling balances the triangle.
#pragma omp parallel for schedule(dynamic, 4)
  for (long long i = 0; i < rows; ++i) {
    gram_row(h, static_cast<std::size_t>(i), g);
  }
  mirror_lower(g);
  return g;
}

}  // namespace parallel

Mat gemm(const Mat& a, Trans ta, const Mat& b, Trans tb) {
  const auto [m, k, n] = check_shapes(a, ta, b, tb);
  if (m * k * n < kParallelThreshold) {
    return serial::gemm(a, ta, b, tb);
  }
  return parallel::gemm(a, ta, b, tb);
}

Mat gram(const Mat& h) {
  if (h.rows() * h.rows() * h.cols() / 2 < kParallelThreshold) {
    return serial::gram(h);
  }
  return parallel::gram(h);
}

}  // namespace gainlora::kernels
