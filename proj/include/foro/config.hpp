#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "foro/backbone.hpp"
#include "foro/engine.hpp"
#include "foro/protocol.hpp"

namespace foro {

/// Resolved experiment configuration. Parsing rejects unknown keys; every
/// omitted key takes the default below, and to_json() echoes the full result.
///
/// {
///   "mode": "foro" | "kem-only" | "fitness-only",
///   "seed": 1,
///   "prompts": 3,
///   "backbone": {"layers": 4, "embed_dim": 16, "patches": 8, "heads": 2, "mlp_ratio": 2.0},
///   "cma": {"population": 6, "generations": 20, "covariance": "full" | "block-diagonal"},
///   "fitness": {"lambda": 0.3, "alpha": 0.1, "eval_batch": 64,
///               "scoring": "leave-one-out" | "in-sample"},
///   "encoding": {"nrp_dim": 8192, "gamma": 0.1, "activation": "relu" | "tanh" | "identity"},
///   "stream": {"synthetic": {...}} | {"manifest": "path/to/manifest.json"},
///   "output_dir": "out"
/// }
///
/// "synthetic" keys: kind ("patches" | "features" | "xor"), tasks, classes_per_task,
/// feature_dim (features/xor only; patch grids take d and m from the backbone),
/// separation, cluster_std, shift, train_per_class, test_per_class.
struct ExperimentConfig {
  Mode mode = Mode::kForo;
  std::uint64_t seed = 1;
  std::size_t prompts = 3;
  BackboneConfig backbone;
  std::size_t population = 6;
  std::size_t generations = 20;
  CovarianceMode covariance = CovarianceMode::kFull;
  double lambda = 0.3;
  double alpha = 0.1;
  std::size_t eval_batch = 64;
  RidgeScoring scoring = RidgeScoring::kLeaveOneOut;
  std::size_t nrp_dim = 8192;
  double gamma = 0.1;
  Activation activation = Activation::kRelu;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::filesystem::path> manifest;
  std::filesystem::path output_dir = "out";

  /// Throws Error(kInvalidConfig).
  void validate() const;

  /// Sets the master seed and re-derives the backbone and data seeds.
  void apply_seed(std::uint64_t master);

  /// Seeds of every module, derived from `seed`.
  EngineSeeds engine_seeds() const;
  std::uint64_t backbone_seed() const;
  std::uint64_t data_seed() const;
  EngineConfig engine_config(std::size_t threads) const;
};

/// Relative manifest paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace foro
