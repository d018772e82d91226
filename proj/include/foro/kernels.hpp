#pragma once

// Inner-loop arithmetic for the engine. Every kernel has a scalar reference
// implementation; vector variants are selected once at startup from CPU
// features and can be pinned with FORO_SIMD=scalar|avx2|neon.
//
// Within one variant the accumulation order is fixed, so results are
// deterministic run to run. Different variants agree to rounding only.

#include <cstddef>
#include <span>
#include <string_view>

namespace foro::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  Isa isa;
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a_i - b_i)^2
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_table();
const KernelTable* neon_table();

/// The table every dispatched call goes through.
const KernelTable& active();

/// Pins the active table. Returns false if the variant is unavailable.
bool select(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  return active().sq_dist(a.data(), b.data(), a.size());
}

}  // namespace foro::kernels
