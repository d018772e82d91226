#pragma once

// Task-by-task learner. Per task (full mode): CMA-ES searches a prompt matrix
// against the regularized fitness on fresh minibatches, the best prompt
// re-encodes the task's training set, the features pass through the random
// projection, and the KEM and classifier absorb them. Nothing is
// back-propagated and no earlier task's training data is read again.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "foro/backbone.hpp"
#include "foro/cma.hpp"
#include "foro/encoding.hpp"
#include "foro/fitness.hpp"
#include "foro/protocol.hpp"

namespace foro {

enum class Mode {
  kForo,         // prompt search + knowledge encoding
  kKemOnly,      // knowledge encoding with the initial (zero) prompt
  kFitnessOnly,  // prompt search; each task's columns come from a ridge fit on that task alone
};

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

struct EngineConfig {
  Mode mode = Mode::kForo;
  std::size_t prompts = 3;
  std::size_t population = 6;
  CovarianceMode covariance = CovarianceMode::kFull;
  FitnessConfig fitness;
  double alpha = 0.1;
  std::size_t nrp_dim = 512;
  double gamma = 0.1;
  Activation activation = Activation::kRelu;
  std::size_t threads = 1;  // concurrent fitness evaluations
};

struct EngineSeeds {
  std::uint64_t projection = 0;
  std::uint64_t cma = 0;
  std::uint64_t minibatch = 0;
};

struct TaskReport {
  std::size_t task = 0;
  std::vector<double> generation_best;  // best fitness within each generation
  std::vector<double> best_so_far;      // running minimum across the task
  double best_fitness = 0.0;            // NaN when no search ran
  double wall_seconds = 0.0;
};

class Engine {
 public:
  /// `backbone` is required for patch inputs and must be absent for feature inputs.
  Engine(const EngineConfig& config, std::optional<BackboneConfig> backbone, std::size_t input_dim,
         const EngineSeeds& seeds);

  TaskReport learn_task(TaskStream& stream, std::size_t t);

  /// Accuracies on tasks 0..j with the current prompt and classifier.
  std::vector<Fraction> evaluate_all(const TaskStream& stream, std::size_t j) const;

  /// Final-layer features of `inputs` under the current prompt (raw rows for feature inputs).
  Matrix features(std::span<const Matrix> inputs) const;
  /// Projected features, ready for the classifier.
  Matrix encode(std::span<const Matrix> inputs) const;

  const EngineConfig& config() const noexcept { return config_; }
  const Kem& kem() const noexcept { return kem_; }
  const Classifier& classifier() const noexcept { return classifier_; }
  const RandomProjection& projection() const noexcept { return projection_; }
  const GlobalStats& history() const noexcept { return history_; }
  const CmaState& cma() const noexcept { return cma_; }
  const Matrix& prompt() const noexcept { return prompt_; }
  const std::optional<Backbone>& backbone() const noexcept { return backbone_; }

 private:
  bool searches() const noexcept { return config_.mode != Mode::kKemOnly; }
  void search_prompt(const SampleSet& train, const Task& task, TaskReport& report);

  EngineConfig config_;
  EngineSeeds seeds_;
  std::optional<Backbone> backbone_;
  RandomProjection projection_;
  Kem kem_;
  Classifier classifier_;
  GlobalStats history_;
  CmaState cma_;
  Matrix prompt_;  // P x d; starts at the CMA-ES mean (zeros)
  std::size_t generations_run_ = 0;
};

/// FORO_THREADS when set and positive, else hardware concurrency (at least 1).
std::size_t default_thread_count();

}  // namespace foro
