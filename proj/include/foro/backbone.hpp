#pragma once

// Frozen surrogate vision transformer. Stands in for a pre-trained ViT: it
// consumes [CLS, prompts, patches] and reports the CLS row after every block.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "foro/linalg.hpp"

namespace foro {

struct BackboneConfig {
  std::size_t layers = 4;
  std::size_t embed_dim = 16;
  std::size_t patches = 8;
  std::size_t heads = 2;
  double mlp_ratio = 2.0;
  std::uint64_t seed = 42;

  std::size_t hidden_dim() const;
  /// Throws Error(kInvalidConfig).
  void validate() const;
};

struct TokenSequence {
  Vector cls;             // d
  Matrix prompts;         // P x d, P may be 0
  Matrix patch_embeddings;  // m x d
};

struct LayerTrace {
  std::vector<Vector> cls_per_layer;  // one per block
  const Vector& final_cls() const { return cls_per_layer.back(); }
};

/// Per-layer, per-dimension CLS statistics over a batch (population std).
struct LayerStats {
  std::vector<Vector> mean;
  std::vector<Vector> std;
};

struct BatchFeatures {
  Matrix features;  // n x d, final CLS rows
  LayerStats stats;
};

class Backbone {
 public:
  /// Weights are drawn from config.seed in this order: cls token, positional
  /// table, then per block wq, wk, wv, wo, w1, w2. Each tensor is filled
  /// row-major with N(0, 1) / sqrt(fan_in); fan_in is the row count, and 1 for
  /// the cls and positional tables.
  explicit Backbone(const BackboneConfig& config);

  const BackboneConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return config_.embed_dim; }
  const Vector& cls_token() const noexcept { return cls_; }

  /// Builds the standard sequence for one input: backbone CLS, given prompts, patches.
  TokenSequence sequence(const Matrix& prompts, const Matrix& patches) const;

  LayerTrace forward(const TokenSequence& seq) const;

  /// FNV-1a over every weight byte; identical for identical configs.
  std::uint64_t checksum() const;

 private:
  struct Block {
    Matrix wq, wk, wv, wo;  // d x d
    Matrix w1;              // d x hidden
    Matrix w2;              // hidden x d
  };

  BackboneConfig config_;
  Vector cls_;
  Matrix positions_;  // m x d, added to patch rows
  std::vector<Block> blocks_;
};

Backbone backbone_build(const BackboneConfig& config);

LayerTrace backbone_forward(const Backbone& bb, const TokenSequence& seq);

/// Forwards every input with the same prompts; throws Error(kEmptyBatch) on an empty list.
BatchFeatures batch_forward(const Backbone& bb, const Matrix& prompts, std::span<const Matrix> inputs);

/// Row-major reshape of a flattened genome into rows x cols.
Matrix reshape(std::span<const double> flat, std::size_t rows, std::size_t cols);

}  // namespace foro
