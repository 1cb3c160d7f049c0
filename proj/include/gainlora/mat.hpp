#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gainlora {

/// Dense row-major float64 matrix. Vectors are stored as n x 1 or 1 x n.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat identity(std::size_t n);
  static Mat column(std::span<const double> values);
  static Mat row(std::span<const double> values);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> data() noexcept { return data_; }
  [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
  [[nodiscard]] std::span<double> row_span(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::span<const double> row_span(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  [[nodiscard]] std::vector<double> col_vector(std::size_t c) const;

  [[nodiscard]] bool same_shape(const Mat& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  // Bitwise comparison of shape and contents.
  bool operator==(const Mat& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat transpose(const Mat& a);
Mat matmul(const Mat& a, const Mat& b);     // a b
Mat matmul_tn(const Mat& a, const Mat& b);  // a^T b
Mat matmul_nt(const Mat& a, const Mat& b);  // a b^T
Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double s, const Mat& a);
Mat& operator+=(Mat& a, const Mat& b);
Mat& operator-=(Mat& a, const Mat& b);

// Column concatenation [a, b]; either side may have zero columns.
Mat hcat(const Mat& a, const Mat& b);
// Rows [first, first + count) of a.
Mat row_block(const Mat& a, std::size_t first, std::size_t count);
// Gather rows by index.
Mat gather_rows(const Mat& a, std::span<const std::size_t> index);

double max_abs(const Mat& a);
double frobenius_sq(const Mat& a);
bool all_finite(const Mat& a);
// max_ij |a_ij - b_ij|
double max_abs_diff(const Mat& a, const Mat& b);

}  // namespace gainlora
