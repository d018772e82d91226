#include "foro/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "foro/error.hpp"
#include "foro/kernels.hpp"
#include "foro/rng.hpp"

namespace foro {
namespace {

constexpr double kLayerNormEps = 1e-5;

Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols, double fan_in) {
  Matrix m(rows, cols);
  const double scale = 1.0 / std::sqrt(fan_in);
  for (double& v : m.data()) v = rng.normal() * scale;
  return m;
}

// Per-row layer normalization without affine parameters.
Matrix layer_norm(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const auto d = static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= d;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) dst[c] = (row[c] - mean) * inv;
  }
  return out;
}

Matrix columns(const Matrix& x, std::size_t first, std::size_t count) {
  Matrix out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    std::copy_n(x.row(r).begin() + static_cast<std::ptrdiff_t>(first), count, out.row(r).begin());
  return out;
}

void softmax_rows(Matrix& s) {
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - top);
      total += v;
    }
    for (double& v : row) v /= total;
  }
}

}  // namespace

std::size_t BackboneConfig::hidden_dim() const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(embed_dim))));
}

void BackboneConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); };
  if (layers < 1) fail("layers must be >= 1");
  if (embed_dim < 2) fail("embed_dim must be >= 2");
  if (patches < 1) fail("patches must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (embed_dim % heads != 0) {
    fail("heads=" + std::to_string(heads) + " does not divide embed_dim=" + std::to_string(embed_dim));
  }
  if (!(mlp_ratio > 0.0) || !std::isfinite(mlp_ratio)) fail("mlp_ratio must be positive");
}

Backbone::Backbone(const BackboneConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  const std::size_t h = config_.hidden_dim();
  Rng rng(config_.seed);
  const Matrix cls = gaussian(rng, 1, d, 1.0);
  cls_.assign(cls.data().begin(), cls.data().end());
  positions_ = gaussian(rng, config_.patches, d, 1.0);
  blocks_.reserve(config_.layers);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    Block b;
    b.wq = gaussian(rng, d, d, static_cast<double>(d));
    b.wk = gaussian(rng, d, d, static_cast<double>(d));
    b.wv = gaussian(rng, d, d, static_cast<double>(d));
    b.wo = gaussian(rng, d, d, static_cast<double>(d));
    b.w1 = gaussian(rng, d, h, static_cast<double>(d));
    b.w2 = gaussian(rng, h, d, static_cast<double>(h));
    blocks_.push_back(std::move(b));
  }
}

TokenSequence Backbone::sequence(const Matrix& prompts, const Matrix& patches) const {
  return TokenSequence{cls_, prompts, patches};
}

LayerTrace Backbone::forward(const TokenSequence& seq) const {
  const std::size_t d = config_.embed_dim;
  const std::size_t m = seq.patch_embeddings.rows();
  const std::size_t prompt_rows = seq.prompts.rows();
  if (seq.cls.size() != d || seq.patch_embeddings.cols() != d ||
      (prompt_rows > 0 && seq.prompts.cols() != d)) {
    throw Error(ErrorCode::kDimensionMismatch, "token width does not match embed_dim=" + std::to_string(d));
  }
  if (m != config_.patches) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(config_.patches) + " patches, got " + std::to_string(m));
  }

  // [cls; prompts; patches + positions]
  const std::size_t tokens = 1 + prompt_rows + m;
  Matrix x(tokens, d);
  std::copy(seq.cls.begin(), seq.cls.end(), x.row(0).begin());
  for (std::size_t p = 0; p < prompt_rows; ++p) std::copy_n(seq.prompts.row(p).begin(), d, x.row(1 + p).begin());
  for (std::size_t i = 0; i < m; ++i) {
    auto dst = x.row(1 + prompt_rows + i);
    const auto src = seq.patch_embeddings.row(i);
    const auto pos = positions_.row(i);
    for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] + pos[c];
  }

  const std::size_t head_dim = d / config_.heads;
  const double inv_sqrt_head = 1.0 / std::sqrt(static_cast<double>(head_dim));

  LayerTrace trace;
  trace.cls_per_layer.reserve(blocks_.size());
  for (const Block& b : blocks_) {
    const Matrix y = layer_norm(x);
    const Matrix q = matmul(y, b.wq);
    const Matrix k = matmul(y, b.wk);
    const Matrix v = matmul(y, b.wv);
    Matrix attended(tokens, d);
    for (std::size_t h = 0; h < config_.heads; ++h) {
      const std::size_t off = h * head_dim;
      Matrix scores = matmul_nt(columns(q, off, head_dim), columns(k, off, head_dim));
      for (double& s : scores.data()) s *= inv_sqrt_head;
      softmax_rows(scores);
      const Matrix out = matmul(scores, columns(v, off, head_dim));
      for (std::size_t r = 0; r < tokens; ++r)
        std::copy_n(out.row(r).begin(), head_dim, attended.row(r).begin() + static_cast<std::ptrdiff_t>(off));
    }
    const Matrix projected = matmul(attended, b.wo);
    kernels::axpy(1.0, projected.data(), x.data());

    Matrix hidden = matmul(layer_norm(x), b.w1);
    for (double& hv : hidden.data()) hv = std::tanh(hv);
    const Matrix mlp = matmul(hidden, b.w2);
    kernels::axpy(1.0, mlp.data(), x.data());

    trace.cls_per_layer.emplace_back(x.row(0).begin(), x.row(0).end());
  }
  return trace;
}

std::uint64_t Backbone::checksum() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&hash](std::span<const double> values) {
    for (double v : values) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char byte : bytes) {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
      }
    }
  };
  feed(cls_);
  feed(positions_.data());
  for (const Block& b : blocks_) {
    for (const Matrix* w : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) feed(w->data());
  }
  return hash;
}

Backbone backbone_build(const BackboneConfig& config) { return Backbone(config); }

LayerTrace backbone_forward(const Backbone& bb, const TokenSequence& seq) { return bb.forward(seq); }

BatchFeatures batch_forward(const Backbone& bb, const Matrix& prompts, std::span<const Matrix> inputs) {
  if (inputs.empty()) throw Error(ErrorCode::kEmptyBatch, "batch_forward on empty input list");
  const std::size_t d = bb.dim();
  const std::size_t layers = bb.config().layers;
  const std::size_t n = inputs.size();

  std::vector<LayerTrace> traces;
  traces.reserve(n);
  for (const Matrix& input : inputs) traces.push_back(bb.forward(bb.sequence(prompts, input)));

  BatchFeatures out;
  out.features = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& f = traces[i].final_cls();
    std::copy(f.begin(), f.end(), out.features.row(i).begin());
  }
  out.stats.mean.assign(layers, Vector(d, 0.0));
  out.stats.std.assign(layers, Vector(d, 0.0));
  const auto inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t l = 0; l < layers; ++l) {
    Vector& mu = out.stats.mean[l];
    for (const auto& t : traces) kernels::axpy(1.0, t.cls_per_layer[l], mu);
    for (double& v : mu) v *= inv_n;
    Vector& sd = out.stats.std[l];
    for (const auto& t : traces)
      for (std::size_t c = 0; c < d; ++c) sd[c] += (t.cls_per_layer[l][c] - mu[c]) * (t.cls_per_layer[l][c] - mu[c]);
    for (double& v : sd) v = std::sqrt(v * inv_n);
  }
  return out;
}

Matrix reshape(std::span<const double> flat, std::size_t rows, std::size_t cols) {
  if (flat.size() != rows * cols) {
    throw Error(ErrorCode::kDimensionMismatch, "cannot reshape " + std::to_string(flat.size()) + " into " +
                                                   std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  std::copy(flat.begin(), flat.end(), m.data().begin());
  return m;
}

}  // namespace foro
