#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sfm {

/// Dense row-major matrix of doubles. Point sets are stored as (count x dim).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  std::string shape_string() const;

  /// Rows selected by index, in the given order.
  Matrix gather_rows(std::span<const std::size_t> idx) const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> v);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// C = A * B for row-major A (r x k) and B (k x c).
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out);
/// C = A * B^T.
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out);
/// C = A^T * B.
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out);

}  // namespace sfm
