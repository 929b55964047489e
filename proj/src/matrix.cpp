#include "sfm/matrix.hpp"

#include <cmath>

#include "sfm/error.hpp"

namespace sfm {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error("matrix data size " + std::to_string(data_.size()) + " does not match shape " +
                shape_string());
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw Error("ragged rows in Matrix::from_rows");
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Matrix Matrix::gather_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    auto src = row(idx[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  out = Matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double* o = out.data() + i * c;
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b.data() + p * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += av * bp[j];
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.rows();
  out = Matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < c; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      out(i, j) = s;
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  out = Matrix(k, c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a.data() + i * k;
    const double* bi = b.data() + i * c;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* o = out.data() + p * c;
      for (std::size_t j = 0; j < c; ++j) o[j] += av * bi[j];
    }
  }
}

}  // namespace sfm
