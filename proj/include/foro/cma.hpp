#pragma once

// (mu/mu_w, lambda)-CMA-ES minimizing a black-box objective over flattened
// prompt vectors. State is a value type: cma_ask and cma_tell never mutate
// their inputs.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "foro/linalg.hpp"
#include "foro/rng.hpp"

namespace foro {

enum class CovarianceMode {
  kFull,           // one n x n covariance over the whole genome
  kBlockDiagonal,  // independent equal-size blocks (one per prompt row)
};

/// Default strategy constants derived from the dimension and population size.
struct StrategyParams {
  std::size_t mu = 0;  // elite count, floor(K / 2)
  Vector weights;      // positive recombination weights, sum to 1
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;  // E||N(0, I)||
};

StrategyParams default_strategy(std::size_t n, std::size_t population);

struct CovarianceBlock {
  std::size_t offset = 0;
  Matrix cov;
};

struct CmaState {
  Vector mean;
  double step_size = 1.0;
  std::vector<CovarianceBlock> blocks;
  Vector path_sigma;
  Vector path_cov;
  std::size_t generation = 0;
  std::size_t population = 0;
  StrategyParams params;
  std::uint64_t seed = 0;

  std::size_t dimension() const noexcept { return mean.size(); }
  /// Full n x n covariance (zero off the diagonal blocks).
  Matrix covariance() const;
};

struct Candidate {
  Vector genome;
  double fitness = std::numeric_limits<double>::quiet_NaN();
  std::size_t index = 0;
};

inline constexpr double kMinStepSize = 1e-12;
inline constexpr double kEigenFloor = 1e-14;

/// m = 0, covariance = I, step size = 1. In block-diagonal mode the genome is
/// split into `block_count` equal blocks.
CmaState cma_init(std::size_t n, std::size_t population, std::uint64_t seed,
                  CovarianceMode mode = CovarianceMode::kFull, std::size_t block_count = 1);

/// Samples `population` candidates m + tau * B D z in index order.
std::vector<Candidate> cma_ask(const CmaState& state, Rng& rng);

/// Ranks by (fitness, index), recombines the elite, adapts step size and covariance.
CmaState cma_tell(const CmaState& state, std::span<const Candidate> evaluated);

/// Lowest-fitness candidate over generations listed in order; ties go to the
/// earliest generation, then the lowest index.
Candidate cma_best(std::span<const std::vector<Candidate>> history);

/// Smallest eigenvalue over all covariance blocks.
double min_covariance_eigenvalue(const CmaState& state);

}  // namespace foro
