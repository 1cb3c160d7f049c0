#pragma once

#include <vector>

#include "gainlora/mat.hpp"

namespace gainlora {

struct SymEig {
  std::vector<double> values;  // descending
  Mat vectors;                 // column j pairs with values[j]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
// Throws NonSymmetric if |s_ij - s_ji| exceeds 1e-10 * max(1, max|s|),
// NonFinite on NaN/Inf input.
SymEig sym_eig(const Mat& s);

}  // namespace gainlora
