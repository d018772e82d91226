#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "foro/backbone.hpp"
#include "foro/cma.hpp"
#include "foro/encoding.hpp"
#include "foro/linalg.hpp"

namespace foro {

/// Exponential moving average of per-layer CLS statistics across tasks.
struct GlobalStats {
  std::vector<Vector> mu_g;
  std::vector<Vector> sigma_g;
  double alpha = 0.1;
  bool initialized = false;
};

/// How the throwaway ridge head scores a candidate's features.
enum class RidgeScoring {
  kInSample,     // logits are the fitted values on the batch itself
  kLeaveOneOut,  // logits are exact leave-one-out predictions
};

std::string_view to_string(RidgeScoring s);
RidgeScoring parse_ridge_scoring(std::string_view name);

struct FitnessConfig {
  double lambda = 0.3;
  std::size_t generations = 20;
  std::size_t eval_batch = 64;
  RidgeScoring scoring = RidgeScoring::kLeaveOneOut;
};

/// sum over layers of ||mu - mu_g||_2 + ||sigma - sigma_g||_2.
double discrepancy(const LayerStats& stats, const GlobalStats& hist);

/// Mean of -log softmax(logits)[true class]; the probability is floored at 1e-12.
double cross_entropy(const Matrix& logits, const Matrix& one_hot_labels);

/// First call seeds the history; later calls blend with weight alpha on the new stats.
GlobalStats update_history(const GlobalStats& hist, const LayerStats& stats);

/// Ridge head fitted on (h, y) with regularizer gamma, scored on the same rows.
/// Solved in the n x n dual: W = H^T (H H^T + gamma I)^{-1} Y.
Matrix ridge_head_logits(const Matrix& h, const Matrix& y, double gamma, RidgeScoring scoring);

struct FitnessBreakdown {
  double cross_entropy = 0.0;
  double discrepancy = 0.0;  // unweighted; 0 while the history is empty
  double total = 0.0;
  LayerStats stats;
};

/// The data a candidate is scored on.
struct EvalBatch {
  std::span<const Matrix> inputs;  // patch grids
  Matrix labels;                   // one-hot over the task's classes
};

struct FitnessContext {
  const Backbone& backbone;
  const RandomProjection& projection;
  const GlobalStats& history;
  FitnessConfig config;
  double gamma = 0.1;
  std::size_t prompt_rows = 0;
};

FitnessBreakdown evaluate_candidate(const Candidate& candidate, const EvalBatch& batch,
                                    const FitnessContext& ctx);

}  // namespace foro
