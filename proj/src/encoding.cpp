#include "foro/encoding.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "foro/error.hpp"
#include "foro/kernels.hpp"
#include "foro/rng.hpp"

namespace foro {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw Error(ErrorCode::kInvalidConfig, "unknown activation '" + std::string(name) + "'");
}

RandomProjection nrp_build(std::size_t input_dim, std::size_t output_dim, Activation activation,
                           std::uint64_t seed) {
  if (input_dim < 1 || output_dim < 1) {
    throw Error(ErrorCode::kInvalidDims, "d=" + std::to_string(input_dim) + " M=" + std::to_string(output_dim));
  }
  RandomProjection p;
  p.w_rp = Matrix(input_dim, output_dim);
  Rng rng(seed);
  for (double& v : p.w_rp.data()) v = rng.normal();
  p.activation = activation;
  p.seed = seed;
  return p;
}

Matrix nrp_project(const RandomProjection& proj, const Matrix& features) {
  if (features.cols() != proj.input_dim()) {
    throw Error(ErrorCode::kShapeMismatch, "features width " + std::to_string(features.cols()) +
                                               " != projection input " + std::to_string(proj.input_dim()));
  }
  Matrix h = matmul(features, proj.w_rp);
  switch (proj.activation) {
    case Activation::kRelu:
      for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::kTanh:
      for (double& v : h.data()) v = std::tanh(v);
      break;
    case Activation::kIdentity:
      break;
  }
  return h;
}

Kem kem_init(std::size_t dim, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw Error(ErrorCode::kNonpositiveGamma, "gamma=" + std::to_string(gamma));
  }
  if (dim < 1) throw Error(ErrorCode::kInvalidDims, "M must be >= 1");
  return Kem{Matrix::identity(dim, 1.0 / gamma), gamma, 0};
}

void Kem::absorb(const Matrix& x) {
  if (x.rows() == 0) return;
  if (x.cols() != dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "batch width " + std::to_string(x.cols()) + " != KEM dim " + std::to_string(dim()));
  }
  const auto& k = kernels::active();
  const std::size_t m = dim();
  for (std::size_t start = 0; start < x.rows(); start += kWoodburyChunk) {
    const std::size_t n = std::min(kWoodburyChunk, x.rows() - start);
    Matrix chunk(n, m);
    for (std::size_t i = 0; i < n; ++i) std::copy_n(x.row(start + i).begin(), m, chunk.row(i).begin());

    // U = X R (n x M); R symmetric so R X^T = U^T.
    const Matrix u = matmul(chunk, r);
    // S = I + X R X^T = I + U X^T
    Matrix s = matmul_nt(u, chunk);
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 1.0;
    symmetrize(s);
    // Z = S^{-1} U, then R -= U^T Z.
    const Matrix z = cholesky_solve(cholesky(s), u);
    for (std::size_t p = 0; p < n; ++p) {
      const auto up = u.row(p);
      const double* zp = z.row(p).data();
      for (std::size_t i = 0; i < m; ++i) {
        if (up[i] != 0.0) k.axpy(-up[i], zp, r.row(i).data(), m);
      }
    }
    symmetrize(r);
  }
  samples_seen += x.rows();
}

Kem kem_update(const Kem& kem, const Matrix& x) {
  Kem next = kem;
  next.absorb(x);
  return next;
}

Classifier classifier_init(std::size_t dim) { return Classifier{Matrix(dim, 0), {}}; }

void Classifier::extend(std::span<const std::uint32_t> new_ids) {
  std::unordered_set<std::uint32_t> seen(class_ids.begin(), class_ids.end());
  for (std::uint32_t id : new_ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateClass, "class " + std::to_string(id));
  }
  w.append_zero_cols(new_ids.size());
  class_ids.insert(class_ids.end(), new_ids.begin(), new_ids.end());
}

Classifier classifier_extend(const Classifier& clf, std::span<const std::uint32_t> new_ids) {
  Classifier next = clf;
  next.extend(new_ids);
  return next;
}

void Classifier::absorb(const Matrix& r_after, const Matrix& x, const Matrix& y) {
  if (x.rows() == 0) return;
  if (x.cols() != dim() || r_after.rows() != dim() || y.rows() != x.rows() || y.cols() != class_count()) {
    throw Error(ErrorCode::kShapeMismatch, "weights_update operand shapes");
  }
  // residual E = Y - X W
  Matrix residual = y;
  const Matrix fitted = matmul(x, w);
  kernels::axpy(-1.0, fitted.data(), residual.data());
  const Matrix correlation = matmul_tn(x, residual);  // M x c
  const Matrix step = matmul(r_after, correlation);
  kernels::axpy(1.0, step.data(), w.data());
}

Matrix one_hot(std::span<const std::uint32_t> labels, std::span<const std::uint32_t> class_ids) {
  Matrix y(labels.size(), class_ids.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(class_ids.begin(), class_ids.end(), labels[i]);
    if (it == class_ids.end()) {
      throw Error(ErrorCode::kShapeMismatch, "label " + std::to_string(labels[i]) + " not in class set");
    }
    y(i, static_cast<std::size_t>(it - class_ids.begin())) = 1.0;
  }
  return y;
}

TaskBatch make_task_batch(Matrix x, std::vector<std::uint32_t> labels, const Classifier& clf) {
  if (x.rows() != labels.size()) throw Error(ErrorCode::kShapeMismatch, "feature rows != label count");
  TaskBatch b;
  b.y = one_hot(labels, clf.class_ids);
  b.x = std::move(x);
  b.labels = std::move(labels);
  return b;
}

Classifier weights_update(const Classifier& clf, const Kem& kem_after, const TaskBatch& batch) {
  Classifier next = clf;
  next.absorb(kem_after.r, batch.x, batch.y);
  return next;
}

Prediction predict(const Classifier& clf, const Matrix& h) {
  if (h.cols() != clf.dim()) {
    throw Error(ErrorCode::kShapeMismatch,
                "feature width " + std::to_string(h.cols()) + " != classifier dim " + std::to_string(clf.dim()));
  }
  Prediction p;
  p.logits = matmul(h, clf.w);
  p.labels.resize(h.rows());
  if (clf.class_count() == 0) return p;
  for (std::size_t i = 0; i < h.rows(); ++i) {
    const auto row = p.logits.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best] || (row[c] == row[best] && clf.class_ids[c] < clf.class_ids[best])) best = c;
    }
    p.labels[i] = clf.class_ids[best];
  }
  return p;
}

Matrix batch_solve_oracle(const Matrix& x_all, const Matrix& y_all, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::kNonpositiveGamma, "gamma=" + std::to_string(gamma));
  if (x_all.rows() != y_all.rows()) throw Error(ErrorCode::kShapeMismatch, "oracle X/Y rows");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto n = static_cast<Eigen::Index>(x_all.rows());
  const auto m = static_cast<Eigen::Index>(x_all.cols());
  const auto c = static_cast<Eigen::Index>(y_all.cols());
  Matrix out(x_all.cols(), y_all.cols());
  if (m == 0 || c == 0) return out;
  const Eigen::Map<const RowMajor> x(x_all.data().data(), n, m);
  const Eigen::Map<const RowMajor> y(y_all.data().data(), n, c);
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += gamma;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kFactorizationFailure, "oracle normal equations");
  const Eigen::MatrixXd w = llt.solve(x.transpose() * y);
  Eigen::Map<RowMajor>(out.data().data(), m, c) = w;
  return out;
}

double accuracy(std::span<const std::uint32_t> predicted, std::span<const std::uint32_t> truth) {
  if (truth.empty()) throw Error(ErrorCode::kEmptyTestset, "no test samples");
  if (predicted.size() != truth.size()) throw Error(ErrorCode::kShapeMismatch, "prediction count");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace foro
