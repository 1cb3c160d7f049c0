#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gainlora {

// Lower-triangular T x T matrix of percentages; row j (0-based) holds the
// performance on tasks 0..j after learning task j.
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t tasks) : tasks_(tasks) {}
  // Builds from explicit rows; row j must have j + 1 entries in [0, 100].
  static AccuracyMatrix from_rows(std::vector<std::vector<double>> rows, std::size_t tasks);

  void set_row(std::size_t j, std::vector<double> row);

  [[nodiscard]] std::size_t tasks() const noexcept { return tasks_; }
  [[nodiscard]] std::size_t rows_filled() const noexcept { return rows_.size(); }
  [[nodiscard]] bool complete() const noexcept { return rows_.size() == tasks_; }
  [[nodiscard]] double at(std::size_t j, std::size_t i) const { return rows_.at(j).at(i); }
  [[nodiscard]] const std::vector<std::vector<double>>& rows() const noexcept { return rows_; }

  bool operator==(const AccuracyMatrix&) const = default;

 private:
  std::size_t tasks_ = 0;
  std::vector<std::vector<double>> rows_;
};

// Mean of the final row. Throws IncompleteMatrix.
double compute_ap(const AccuracyMatrix& a);

// Mean over i < T of (max_{l < T} A_{l,i} - A_{T,i}). Throws IncompleteMatrix
// or SingleTask.
double compute_ft(const AccuracyMatrix& a);

// Mean of row j; the per-task AP curve.
double row_average(const AccuracyMatrix& a, std::size_t j);

}  // namespace gainlora
