#include "gainlora/metrics.hpp"

#include <algorithm>
#include <string>

#include "gainlora/error.hpp"

namespace gainlora {

AccuracyMatrix AccuracyMatrix::from_rows(std::vector<std::vector<double>> rows,
                                         std::size_t tasks) {
  AccuracyMatrix a(tasks);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    a.set_row(j, std::move(rows[j]));
  }
  return a;
}

void AccuracyMatrix::set_row(std::size_t j, std::vector<double> row) {
  require(j == rows_.size() && j < tasks_, ErrorKind::OrderViolation,
          "row " + std::to_string(j) + " set out of order");
  require(row.size() == j + 1, ErrorKind::ShapeMismatch,
          "row " + std::to_string(j) + " needs " + std::to_string(j + 1) + " entries");
  for (double v : row) {
    require(v >= 0.0 && v <= 100.0, ErrorKind::SchemaError, "accuracy outside [0, 100]");
  }
  rows_.push_back(std::move(row));
}

double compute_ap(const AccuracyMatrix& a) {
  require(a.tasks() >= 1 && a.complete(), ErrorKind::IncompleteMatrix,
          "final row missing (" + std::to_string(a.rows_filled()) + "/" +
              std::to_string(a.tasks()) + " rows)");
  return row_average(a, a.tasks() - 1);
}

double compute_ft(const AccuracyMatrix& a) {
  require(a.tasks() >= 2, ErrorKind::SingleTask, "forgetting needs at least two tasks");
  require(a.complete(), ErrorKind::IncompleteMatrix, "final row missing");
  const std::size_t last = a.tasks() - 1;
  double total = 0.0;
  for (std::size_t i = 0; i < last; ++i) {
    double best = a.at(i, i);
    for (std::size_t l = i + 1; l < last; ++l) {
      best = std::max(best, a.at(l, i));
    }
    total += best - a.at(last, i);
  }
  return total / static_cast<double>(last);
}

double row_average(const AccuracyMatrix& a, std::size_t j) {
  const auto& row = a.rows().at(j);
  double total = 0.0;
  for (double v : row) {
    total += v;
  }
  return total / static_cast<double>(row.size());
}

}  // namespace gainlora
