#include "gainlora/mat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gainlora/error.hpp"
#include "gainlora/kernels.hpp"

namespace gainlora {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonSymmetric: return "NonSymmetric";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NonScalarLoss: return "NonScalarLoss";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::ThresholdUnreachable: return "ThresholdUnreachable";
    case ErrorKind::NoFreeSubspace: return "NoFreeSubspace";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::IdOutOfRange: return "IdOutOfRange";
    case ErrorKind::WindowOverlap: return "WindowOverlap";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::UnknownPreset: return "UnknownPreset";
    case ErrorKind::OrderViolation: return "OrderViolation";
    case ErrorKind::IncompleteMatrix: return "IncompleteMatrix";
    case ErrorKind::SingleTask: return "SingleTask";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows * cols, ErrorKind::ShapeMismatch,
          "data length " + std::to_string(data_.size()) + " for " + std::to_string(rows) + "x" +
              std::to_string(cols));
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Mat m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    require(row.size() == c, ErrorKind::ShapeMismatch, "ragged initializer");
    std::copy(row.begin(), row.end(), m.row_span(i).begin());
    ++i;
  }
  return m;
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

Mat Mat::column(std::span<const double> values) {
  return Mat(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Mat Mat::row(std::span<const double> values) {
  return Mat(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Mat::col_vector(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    out[r] = (*this)(r, c);
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      t(j, i) = a(i, j);
    }
  }
  return t;
}

Mat matmul(const Mat& a, const Mat& b) {
  return kernels::gemm(a, kernels::Trans::No, b, kernels::Trans::No);
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  return kernels::gemm(a, kernels::Trans::Yes, b, kernels::Trans::No);
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  return kernels::gemm(a, kernels::Trans::No, b, kernels::Trans::Yes);
}

Mat& operator+=(Mat& a, const Mat& b) {
  require(a.same_shape(b), ErrorKind::ShapeMismatch, "elementwise add");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    ad[i] += bd[i];
  }
  return a;
}

Mat& operator-=(Mat& a, const Mat& b) {
  require(a.same_shape(b), ErrorKind::ShapeMismatch, "elementwise subtract");
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    ad[i] -= bd[i];
  }
  return a;
}

Mat operator+(const Mat& a, const Mat& b) {
  Mat c = a;
  c += b;
  return c;
}

Mat operator-(const Mat& a, const Mat& b) {
  Mat c = a;
  c -= b;
  return c;
}

Mat operator*(double s, const Mat& a) {
  Mat c = a;
  for (double& v : c.data()) {
    v *= s;
  }
  return c;
}

Mat hcat(const Mat& a, const Mat& b) {
  if (a.cols() == 0) {
    return b;
  }
  if (b.cols() == 0) {
    return a;
  }
  require(a.rows() == b.rows(), ErrorKind::ShapeMismatch, "hcat row counts differ");
  Mat c(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row_span(i);
    std::copy(a.row_span(i).begin(), a.row_span(i).end(), out.begin());
    std::copy(b.row_span(i).begin(), b.row_span(i).end(), out.begin() + a.cols());
  }
  return c;
}

Mat row_block(const Mat& a, std::size_t first, std::size_t count) {
  require(first + count <= a.rows(), ErrorKind::ShapeMismatch, "row block out of range");
  Mat c(count, a.cols());
  for (std::size_t i = 0; i < count; ++i) {
    std::copy(a.row_span(first + i).begin(), a.row_span(first + i).end(),
              c.row_span(i).begin());
  }
  return c;
}

Mat gather_rows(const Mat& a, std::span<const std::size_t> index) {
  Mat c(index.size(), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < a.rows(), ErrorKind::ShapeMismatch, "gather index out of range");
    std::copy(a.row_span(index[i]).begin(), a.row_span(index[i]).end(), c.row_span(i).begin());
  }
  return c;
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.data()) {
    m = std::max(m, std::abs(v));
  }
  return m;
}

double frobenius_sq(const Mat& a) {
  double s = 0.0;
  for (double v : a.data()) {
    s += v * v;
  }
  return s;
}

bool all_finite(const Mat& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Mat& a, const Mat& b) {
  require(a.same_shape(b), ErrorKind::ShapeMismatch, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  }
  return m;
}

}  // namespace gainlora
