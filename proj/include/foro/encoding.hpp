#pragma once

// Knowledge encoding: a frozen nonlinear random projection followed by a ridge
// classifier kept exact under streaming data. R = (X^T X + gamma I)^{-1} is
// carried forward with the Woodbury identity, so the weights after any stream
// of batches equal the closed-form ridge solution on their union.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "foro/linalg.hpp"

namespace foro {

enum class Activation { kRelu, kTanh, kIdentity };

std::string_view to_string(Activation a);
/// Throws Error(kInvalidConfig) for unknown names.
Activation parse_activation(std::string_view name);

struct RandomProjection {
  Matrix w_rp;  // d x M, i.i.d. N(0, 1)
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  std::size_t input_dim() const noexcept { return w_rp.rows(); }
  std::size_t output_dim() const noexcept { return w_rp.cols(); }
};

RandomProjection nrp_build(std::size_t input_dim, std::size_t output_dim, Activation activation,
                           std::uint64_t seed);

/// phi(features * w_rp), elementwise phi.
Matrix nrp_project(const RandomProjection& proj, const Matrix& features);

/// Rows per Woodbury application; bounds the inner n x n solve.
inline constexpr std::size_t kWoodburyChunk = 256;

struct Kem {
  Matrix r;  // M x M, symmetric positive definite
  double gamma = 0.0;
  std::uint64_t samples_seen = 0;

  std::size_t dim() const noexcept { return r.rows(); }

  /// R <- R - R X^T (I + X R X^T)^{-1} X R, in chunks of kWoodburyChunk rows.
  void absorb(const Matrix& x);
};

Kem kem_init(std::size_t dim, double gamma);
Kem kem_update(const Kem& kem, const Matrix& x);

struct Classifier {
  Matrix w;  // M x c
  std::vector<std::uint32_t> class_ids;

  std::size_t dim() const noexcept { return w.rows(); }
  std::size_t class_count() const noexcept { return class_ids.size(); }

  void extend(std::span<const std::uint32_t> new_ids);
  /// W <- W + R_t X^T (Y - X W). `kem_after` must already contain the batch.
  void absorb(const Matrix& r_after, const Matrix& x, const Matrix& y);
};

/// Zero classes; the first task's extend() adds columns.
Classifier classifier_init(std::size_t dim);
Classifier classifier_extend(const Classifier& clf, std::span<const std::uint32_t> new_ids);

struct TaskBatch {
  Matrix x;  // n x M projected features
  Matrix y;  // n x c one-hot over the classifier's class_ids
  std::vector<std::uint32_t> labels;
};

/// One-hot encodes `labels` against `class_ids`; unknown labels are a shape error.
Matrix one_hot(std::span<const std::uint32_t> labels, std::span<const std::uint32_t> class_ids);
TaskBatch make_task_batch(Matrix x, std::vector<std::uint32_t> labels, const Classifier& clf);

Classifier weights_update(const Classifier& clf, const Kem& kem_after, const TaskBatch& batch);

struct Prediction {
  Matrix logits;
  std::vector<std::uint32_t> labels;
};

/// logits = h W; argmax with ties resolved to the lowest class id.
Prediction predict(const Classifier& clf, const Matrix& h);

/// (X^T X + gamma I)^{-1} X^T Y by a direct dense factorization, independent
/// of the recursive path.
Matrix batch_solve_oracle(const Matrix& x_all, const Matrix& y_all, double gamma);

/// Fraction of predictions equal to `truth`; throws Error(kEmptyTestset) on empty input.
double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth);

}  // namespace foro
