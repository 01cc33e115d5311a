#include "ewod/linalg/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace ewod::linalg {

void Matrix::check_dims() const {
  if (rows_ < 1 || cols_ < 1) {
    throw std::invalid_argument("Matrix: rows and cols must be >= 1");
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_dims();
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data length != rows * cols");
  }
  require_finite(*this, "Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(const std::vector<double>& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ");
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        c(i, j) += aik * b(k, j);
      }
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    c.data()[i] = a.data()[i] + b.data()[i];
  }
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    c.data()[i] = a.data()[i] - b.data()[i];
  }
  return c;
}

Matrix scale(double s, const Matrix& m) {
  Matrix c(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) c.data()[i] = s * m.data()[i];
  return c;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    throw std::invalid_argument("matvec: vector length != cols");
  }
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += r[j] * x[j];
    y[i] = s;
  }
  return y;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("frobenius_distance: shape mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void require_finite(const Matrix& m, const std::string& what) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(what + ": non-finite entry");
    }
  }
}

}  // namespace ewod::linalg
