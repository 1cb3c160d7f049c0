#pragma once

// Dense kernels in two flavours. `serial` is the plain reference loop nest;
// `parallel` distributes output rows over OpenMP threads. Each output entry
// is accumulated over the inner index in ascending order in both, so the two
// produce bit-identical results for any thread count.

#include <cstddef>

#include "gainlora/mat.hpp"

namespace gainlora::kernels {

enum class Trans { No, Yes };

namespace serial {
// op(a) * op(b)
Mat gemm(const Mat& a, Trans ta, const Mat& b, Trans tb);
// h h^T for h of shape d x n; result exactly symmetric.
Mat gram(const Mat& h);
}  // namespace serial

namespace parallel {
Mat gemm(const Mat& a, Trans ta, const Mat& b, Trans tb);
Mat gram(const Mat& h);
}  // namespace parallel

// Work (multiply-adds) below which the dispatchers stay single-threaded.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 16;

Mat gemm(const Mat& a, Trans ta, const Mat& b, Trans tb);
Mat gram(const Mat& h);

}  // namespace gainlora::kernels
