#include "foro/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "foro/error.hpp"
#include "foro/kernels.hpp"
#include "foro/rng.hpp"

namespace foro {

Matrix Matrix::identity(std::size_t n, double scale) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
  return m;
}

void Matrix::append_zero_cols(std::size_t extra) {
  if (extra == 0) return;
  const std::size_t new_cols = cols_ + extra;
  std::vector<double> grown(rows_ * new_cols, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_), cols_,
                grown.begin() + static_cast<std::ptrdiff_t>(r * new_cols));
  }
  data_ = std::move(grown);
  cols_ = new_cols;
}

void Matrix::append_rows(const Matrix& other) {
  if (other.rows_ == 0) return;
  if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
  if (other.cols_ != cols_) {
    throw Error(ErrorCode::kShapeMismatch, "append_rows width " + std::to_string(other.cols_) +
                                               " != " + std::to_string(cols_));
  }
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  rows_ += other.rows_;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + " " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul", a, b);
  Matrix out(a.rows(), b.cols());
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const double s = a(i, p);
      if (s != 0.0) k.axpy(s, b.row(p).data(), dst.data(), b.cols());
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      out(i, j) = k.dot(a.row(i).data(), b.row(j).data(), a.cols());
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  const auto& k = kernels::active();
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const auto arow = a.row(p);
    const auto brow = b.row(p);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = arow[i];
      if (s != 0.0) k.axpy(s, brow.data(), out.row(i).data(), b.cols());
    }
  }
  return out;
}

void symmetrize(Matrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  }
}

double frobenius_norm(const Matrix& a) {
  const auto d = a.data();
  return std::sqrt(kernels::dot(d, d));
}

double relative_frobenius(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "relative_frobenius");
  }
  const double diff = std::sqrt(kernels::sq_dist(a.data(), b.data()));
  return diff / std::max(frobenius_norm(b), 1e-300);
}

double max_asymmetry(const Matrix& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
  return worst;
}

Matrix cholesky(const Matrix& spd) {
  if (spd.rows() != spd.cols()) throw Error(ErrorCode::kShapeMismatch, "cholesky of non-square");
  const std::size_t n = spd.rows();
  Matrix lower(n, n);
  const auto& k = kernels::active();
  for (std::size_t j = 0; j < n; ++j) {
    const double* lj = lower.row(j).data();
    const double diag = spd(j, j) - k.dot(lj, lj, j);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw Error(ErrorCode::kFactorizationFailure,
                  "non-positive pivot " + std::to_string(diag) + " at " + std::to_string(j));
    }
    const double ljj = std::sqrt(diag);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      lower(i, j) = (spd(i, j) - k.dot(lower.row(i).data(), lj, j)) / ljj;
    }
  }
  return lower;
}

Matrix cholesky_solve(const Matrix& lower, const Matrix& rhs) {
  const std::size_t n = lower.rows();
  if (rhs.rows() != n) throw Error(ErrorCode::kShapeMismatch, "cholesky_solve rhs rows");
  const std::size_t m = rhs.cols();
  const auto& k = kernels::active();
  // Row-oriented substitution so each step is an axpy over the rhs width.
  Matrix y = rhs;
  for (std::size_t i = 0; i < n; ++i) {
    auto yi = y.row(i);
    for (std::size_t p = 0; p < i; ++p) k.axpy(-lower(i, p), y.row(p).data(), yi.data(), m);
    const double inv = 1.0 / lower(i, i);
    for (double& v : yi) v *= inv;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    auto xi = y.row(ii);
    for (std::size_t p = ii + 1; p < n; ++p) k.axpy(-lower(p, ii), y.row(p).data(), xi.data(), m);
    const double inv = 1.0 / lower(ii, ii);
    for (double& v : xi) v *= inv;
  }
  return y;
}

namespace {

// Largest eigenvalue of (shift I - a) by power iteration, for symmetric a.
double power_iteration(const Matrix& a, double shift, double sign, std::size_t max_iterations) {
  const std::size_t n = a.rows();
  Rng rng(0x5eed);
  Vector v(n), w(n);
  for (double& x : v) x = rng.normal();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const double norm = std::sqrt(kernels::dot(v, v));
    if (norm == 0.0) return 0.0;
    for (double& x : v) x /= norm;
    for (std::size_t i = 0; i < n; ++i) w[i] = shift * v[i] + sign * kernels::dot(a.row(i), v);
    const double next = kernels::dot(v, w);
    std::swap(v, w);
    if (it > 0 && std::abs(next - lambda) <= 1e-12 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace

double spd_condition_estimate(const Matrix& spd, std::size_t max_iterations) {
  if (spd.rows() != spd.cols() || spd.rows() == 0) throw Error(ErrorCode::kShapeMismatch, "condition estimate");
  const double top = power_iteration(spd, 0.0, 1.0, max_iterations);
  const double gap = power_iteration(spd, top, -1.0, max_iterations);
  const double bottom = top - gap;
  if (!(bottom > 0.0)) return std::numeric_limits<double>::infinity();
  return top / bottom;
}

}  // namespace foro
