#include "foro/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "foro/error.hpp"
#include "foro/kernels.hpp"

namespace foro {
namespace {

constexpr double kProbabilityFloor = 1e-12;

void check_shapes(const LayerStats& stats, const GlobalStats& hist) {
  const bool ok = stats.mean.size() == hist.mu_g.size() && stats.std.size() == hist.sigma_g.size() &&
                  stats.mean.size() == stats.std.size();
  if (!ok) throw Error(ErrorCode::kShapeMismatch, "layer count differs from history");
  for (std::size_t l = 0; l < stats.mean.size(); ++l) {
    if (stats.mean[l].size() != hist.mu_g[l].size() || stats.std[l].size() != hist.sigma_g[l].size()) {
      throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(l) + " width differs from history");
    }
  }
}

}  // namespace

std::string_view to_string(RidgeScoring s) {
  return s == RidgeScoring::kInSample ? "in-sample" : "leave-one-out";
}

RidgeScoring parse_ridge_scoring(std::string_view name) {
  if (name == "in-sample") return RidgeScoring::kInSample;
  if (name == "leave-one-out") return RidgeScoring::kLeaveOneOut;
  throw Error(ErrorCode::kInvalidConfig, "unknown ridge scoring '" + std::string(name) + "'");
}

double discrepancy(const LayerStats& stats, const GlobalStats& hist) {
  if (!hist.initialized) throw Error(ErrorCode::kUninitializedHistory, "discrepancy before first task");
  check_shapes(stats, hist);
  double total = 0.0;
  for (std::size_t l = 0; l < stats.mean.size(); ++l) {
    total += std::sqrt(kernels::sq_dist(stats.mean[l], hist.mu_g[l]));
    total += std::sqrt(kernels::sq_dist(stats.std[l], hist.sigma_g[l]));
  }
  return total;
}

double cross_entropy(const Matrix& logits, const Matrix& one_hot_labels) {
  if (logits.rows() != one_hot_labels.rows() || logits.cols() != one_hot_labels.cols() || logits.cols() < 1) {
    throw Error(ErrorCode::kShapeMismatch, "logits and labels disagree");
  }
  if (logits.rows() == 0) return 0.0;
  const double cap = -std::log(kProbabilityFloor);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const auto y = one_hot_labels.row(i);
    std::size_t truth = y.size();
    for (std::size_t c = 0; c < y.size(); ++c) {
      if (y[c] == 1.0 && truth == y.size()) {
        truth = c;
      } else if (y[c] != 0.0) {
        throw Error(ErrorCode::kShapeMismatch, "label row " + std::to_string(i) + " is not one-hot");
      }
    }
    if (truth == y.size()) throw Error(ErrorCode::kShapeMismatch, "label row " + std::to_string(i) + " is empty");
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    const double nll = (top + std::log(sum)) - z[truth];
    total += std::min(nll, cap);
  }
  return total / static_cast<double>(logits.rows());
}

GlobalStats update_history(const GlobalStats& hist, const LayerStats& stats) {
  GlobalStats next = hist;
  if (!hist.initialized) {
    next.mu_g = stats.mean;
    next.sigma_g = stats.std;
    next.initialized = true;
    return next;
  }
  check_shapes(stats, hist);
  const double a = hist.alpha;
  for (std::size_t l = 0; l < stats.mean.size(); ++l) {
    for (std::size_t c = 0; c < stats.mean[l].size(); ++c) {
      next.mu_g[l][c] = a * stats.mean[l][c] + (1.0 - a) * hist.mu_g[l][c];
      next.sigma_g[l][c] = a * stats.std[l][c] + (1.0 - a) * hist.sigma_g[l][c];
    }
  }
  return next;
}

Matrix ridge_head_logits(const Matrix& h, const Matrix& y, double gamma, RidgeScoring scoring) {
  if (h.rows() != y.rows()) throw Error(ErrorCode::kShapeMismatch, "ridge head rows");
  if (!(gamma > 0.0)) throw Error(ErrorCode::kNonpositiveGamma, "gamma=" + std::to_string(gamma));
  const std::size_t n = h.rows();
  // A = H H^T + gamma I; alpha = A^{-1} Y; fitted = H H^T alpha = Y - gamma alpha.
  Matrix a = matmul_nt(h, h);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += gamma;
  symmetrize(a);
  const Matrix lower = cholesky(a);
  const Matrix alpha = cholesky_solve(lower, y);
  Matrix logits = y;
  if (scoring == RidgeScoring::kInSample) {
    kernels::axpy(-gamma, alpha.data(), logits.data());
    return logits;
  }
  // Leave-one-out residual of row i is alpha_i / (A^{-1})_ii.
  const Matrix inverse = cholesky_solve(lower, Matrix::identity(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = 1.0 / inverse(i, i);
    kernels::axpy(-scale, alpha.row(i), logits.row(i));
  }
  return logits;
}

FitnessBreakdown evaluate_candidate(const Candidate& candidate, const EvalBatch& batch,
                                    const FitnessContext& ctx) {
  const std::size_t d = ctx.backbone.dim();
  const Matrix prompts = reshape(candidate.genome, ctx.prompt_rows, d);
  BatchFeatures forward = batch_forward(ctx.backbone, prompts, batch.inputs);
  const Matrix h = nrp_project(ctx.projection, forward.features);
  const Matrix logits = ridge_head_logits(h, batch.labels, ctx.gamma, ctx.config.scoring);

  FitnessBreakdown out;
  out.cross_entropy = cross_entropy(logits, batch.labels);
  if (ctx.history.initialized) out.discrepancy = discrepancy(forward.stats, ctx.history);
  out.total = out.cross_entropy + ctx.config.lambda * out.discrepancy;
  out.stats = std::move(forward.stats);
  return out;
}

}  // namespace foro
