#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace foro {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n, double scale = 1.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Appends zero-filled columns, keeping existing entries in place.
  void append_zero_cols(std::size_t extra);
  /// Appends rows copied from `other` (same width).
  void append_rows(const Matrix& other);

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Products. All inner loops go through foro::kernels.
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b

/// (a + a^T) / 2, in place.
void symmetrize(Matrix& a);

double frobenius_norm(const Matrix& a);
/// ||a - b||_F / max(||b||_F, tiny). Used by every equivalence check.
double relative_frobenius(const Matrix& a, const Matrix& b);
double max_asymmetry(const Matrix& a);

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
/// Throws Error(kFactorizationFailure) on a non-positive pivot.
Matrix cholesky(const Matrix& spd);

/// Solves (L L^T) X = B for X given the Cholesky factor L.
Matrix cholesky_solve(const Matrix& lower, const Matrix& rhs);

/// lambda_max / lambda_min of a symmetric positive definite matrix by power
/// iteration on A and on lambda_max I - A.
double spd_condition_estimate(const Matrix& spd, std::size_t max_iterations = 500);

}  // namespace foro
