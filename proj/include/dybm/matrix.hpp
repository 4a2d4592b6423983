#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dybm {

/// Dense row-major matrix. Sized once; elements default to zero.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// y += A x
  void add_matvec(std::span<const double> x, std::vector<double>& y) const {
    if (x.size() != cols_ || y.size() != rows_) {
      throw std::invalid_argument("Matrix::add_matvec: shape mismatch");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      double acc = 0.0;
      const double* row = data_.data() + i * cols_;
      for (std::size_t j = 0; j < cols_; ++j) acc += row[j] * x[j];
      y[i] += acc;
    }
  }

  /// A += scale * a b^T
  void add_outer(double scale, std::span<const double> a, std::span<const double> b) {
    if (a.size() != rows_ || b.size() != cols_) {
      throw std::invalid_argument("Matrix::add_outer: shape mismatch");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      double* row = data_.data() + i * cols_;
      const double s = scale * a[i];
      for (std::size_t j = 0; j < cols_; ++j) row[j] += s * b[j];
    }
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace dybm
