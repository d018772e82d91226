#pragma once

#include <doctest.h>

#include <cmath>
#include <span>

#include "foro/error.hpp"
#include "foro/linalg.hpp"
#include "foro/rng.hpp"

namespace foro::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

inline Matrix from_values(std::span<const double> values, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) m.data()[i] = values[i];
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace foro::test

#define CHECK_FORO_ERROR(expr, expected)                       \
  do {                                                         \
    bool thrown_ = false;                                      \
    try {                                                      \
      (void)(expr);                                            \
    } catch (const ::foro::Error& e_) {                        \
      thrown_ = true;                                          \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());       \
    }                                                          \
    CHECK_MESSAGE(thrown_, "expected " #expected);             \
  } while (false)
