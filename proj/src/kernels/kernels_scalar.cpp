#include "foro/kernels.hpp"

namespace foro::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sq_dist_scalar(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

constexpr KernelTable kScalar{Isa::kScalar, "scalar", dot_scalar, axpy_scalar, sq_dist_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace foro::kernels
