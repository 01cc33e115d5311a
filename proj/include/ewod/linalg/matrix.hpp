#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ewod::linalg {

/// Dense row-major matrix of doubles. The substrate for base weights, LoRA
/// factors and SVD factors. Entries are validated finite on construction
/// from external data.
class Matrix {
 public:
  Matrix() = default;  // empty (0x0), assign before use

  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    check_dims();
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diag(const std::vector<double>& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  void check_dims() const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(double s, const Matrix& m);
std::vector<double> matvec(const Matrix& m, std::span<const double> x);
double frobenius_norm(const Matrix& m);
double frobenius_distance(const Matrix& a, const Matrix& b);

/// Throws std::invalid_argument if any entry is NaN or infinite.
void require_finite(const Matrix& m, const std::string& what);

}  // namespace ewod::linalg
