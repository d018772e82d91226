#include "foro/cma.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "foro/error.hpp"
#include "foro/kernels.hpp"

namespace foro {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Eigen factor of one covariance block: cov = basis * diag(scales^2) * basis^T.
struct BlockFactor {
  Eigen::MatrixXd basis;
  Eigen::VectorXd scales;
};

BlockFactor factor(const Matrix& cov) {
  const Eigen::Map<const RowMajor> view(cov.data().data(), static_cast<Eigen::Index>(cov.rows()),
                                        static_cast<Eigen::Index>(cov.cols()));
  const Eigen::MatrixXd sym = 0.5 * (view + view.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kCovarianceNotPd, "eigendecomposition did not converge");
  }
  Eigen::VectorXd values = solver.eigenvalues();
  const double largest = values.maxCoeff();
  if (!std::isfinite(largest) || !(largest > 0.0) || !values.allFinite()) {
    throw Error(ErrorCode::kCovarianceNotPd, "largest eigenvalue " + std::to_string(largest));
  }
  // Rounding can push tiny eigenvalues slightly negative; a genuinely
  // indefinite matrix is an error.
  if (values.minCoeff() < -1e-8 * largest) {
    throw Error(ErrorCode::kCovarianceNotPd, "eigenvalue " + std::to_string(values.minCoeff()));
  }
  values = values.cwiseMax(kEigenFloor * largest);
  return {solver.eigenvectors(), values.cwiseSqrt()};
}

std::vector<BlockFactor> factor_all(const CmaState& state) {
  std::vector<BlockFactor> out;
  out.reserve(state.blocks.size());
  for (const auto& b : state.blocks) out.push_back(factor(b.cov));
  return out;
}

double norm(std::span<const double> v) { return std::sqrt(kernels::dot(v, v)); }

}  // namespace

StrategyParams default_strategy(std::size_t n, std::size_t population) {
  StrategyParams p;
  const auto nd = static_cast<double>(n);
  p.mu = population / 2;
  p.weights.resize(p.mu);
  for (std::size_t i = 0; i < p.mu; ++i) {
    p.weights[i] = std::log(static_cast<double>(p.mu) + 0.5) - std::log(static_cast<double>(i + 1));
  }
  const double total = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  double sq = 0.0;
  for (double& w : p.weights) {
    w /= total;
    sq += w * w;
  }
  p.mu_eff = 1.0 / sq;
  p.c_sigma = (p.mu_eff + 2.0) / (nd + p.mu_eff + 5.0);
  p.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (nd + 1.0)) - 1.0) + p.c_sigma;
  p.c_c = (4.0 + p.mu_eff / nd) / (nd + 4.0 + 2.0 * p.mu_eff / nd);
  p.c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + p.mu_eff);
  p.c_mu = std::min(1.0 - p.c_1,
                    2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) / ((nd + 2.0) * (nd + 2.0) + p.mu_eff));
  p.chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));
  return p;
}

Matrix CmaState::covariance() const {
  Matrix full(dimension(), dimension());
  for (const auto& b : blocks)
    for (std::size_t i = 0; i < b.cov.rows(); ++i)
      for (std::size_t j = 0; j < b.cov.cols(); ++j) full(b.offset + i, b.offset + j) = b.cov(i, j);
  return full;
}

CmaState cma_init(std::size_t n, std::size_t population, std::uint64_t seed, CovarianceMode mode,
                  std::size_t block_count) {
  if (n < 1 || population < 2) {
    throw Error(ErrorCode::kInvalidDimension,
                "n=" + std::to_string(n) + " K=" + std::to_string(population));
  }
  if (mode == CovarianceMode::kFull) block_count = 1;
  if (block_count < 1 || n % block_count != 0) {
    throw Error(ErrorCode::kInvalidDimension,
                "block count " + std::to_string(block_count) + " does not divide n=" + std::to_string(n));
  }
  CmaState s;
  s.mean.assign(n, 0.0);
  s.step_size = 1.0;
  const std::size_t block = n / block_count;
  for (std::size_t b = 0; b < block_count; ++b) s.blocks.push_back({b * block, Matrix::identity(block)});
  s.path_sigma.assign(n, 0.0);
  s.path_cov.assign(n, 0.0);
  s.population = population;
  s.params = default_strategy(n, population);
  s.seed = seed;
  return s;
}

std::vector<Candidate> cma_ask(const CmaState& state, Rng& rng) {
  const auto factors = factor_all(state);
  std::vector<Candidate> out(state.population);
  for (std::size_t k = 0; k < state.population; ++k) {
    Candidate& c = out[k];
    c.index = k;
    c.genome = state.mean;
    for (std::size_t b = 0; b < state.blocks.size(); ++b) {
      const auto& f = factors[b];
      const auto size = static_cast<Eigen::Index>(f.scales.size());
      Eigen::VectorXd z(size);
      for (Eigen::Index i = 0; i < size; ++i) z(i) = rng.normal();
      const Eigen::VectorXd y = f.basis * f.scales.cwiseProduct(z);
      const std::size_t off = state.blocks[b].offset;
      for (Eigen::Index i = 0; i < size; ++i) {
        c.genome[off + static_cast<std::size_t>(i)] += state.step_size * y(i);
      }
    }
  }
  return out;
}

CmaState cma_tell(const CmaState& state, std::span<const Candidate> evaluated) {
  const std::size_t n = state.dimension();
  if (evaluated.size() != state.population) {
    throw Error(ErrorCode::kInvalidDimension, "expected " + std::to_string(state.population) +
                                                  " candidates, got " + std::to_string(evaluated.size()));
  }
  for (const auto& c : evaluated) {
    if (!std::isfinite(c.fitness)) {
      throw Error(ErrorCode::kNonFiniteFitness, "candidate " + std::to_string(c.index));
    }
    if (c.genome.size() != n) throw Error(ErrorCode::kDimensionMismatch, "genome length");
  }

  std::vector<std::size_t> order(evaluated.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (evaluated[a].fitness != evaluated[b].fitness) return evaluated[a].fitness < evaluated[b].fitness;
    return evaluated[a].index < evaluated[b].index;
  });

  const StrategyParams& p = state.params;
  const double sigma = std::max(state.step_size, kMinStepSize);
  const auto factors = factor_all(state);

  // Elite steps y_i = (x_i - m) / sigma and their weighted mean.
  std::vector<Vector> steps(p.mu, Vector(n));
  Vector y_w(n, 0.0);
  for (std::size_t i = 0; i < p.mu; ++i) {
    const Vector& x = evaluated[order[i]].genome;
    for (std::size_t j = 0; j < n; ++j) steps[i][j] = (x[j] - state.mean[j]) / sigma;
    kernels::axpy(p.weights[i], steps[i], y_w);
  }

  CmaState next = state;
  for (std::size_t j = 0; j < n; ++j) next.mean[j] = state.mean[j] + sigma * y_w[j];

  // C^{-1/2} y_w, block by block.
  Vector whitened(n, 0.0);
  for (std::size_t b = 0; b < state.blocks.size(); ++b) {
    const auto& f = factors[b];
    const std::size_t off = state.blocks[b].offset;
    const auto size = static_cast<Eigen::Index>(f.scales.size());
    const Eigen::Map<const Eigen::VectorXd> yb(y_w.data() + off, size);
    const Eigen::VectorXd w = f.basis * (f.basis.transpose() * yb).cwiseQuotient(f.scales);
    for (Eigen::Index i = 0; i < size; ++i) whitened[off + static_cast<std::size_t>(i)] = w(i);
  }

  const double cs = p.c_sigma;
  const double sigma_gain = std::sqrt(cs * (2.0 - cs) * p.mu_eff);
  for (std::size_t j = 0; j < n; ++j) {
    next.path_sigma[j] = (1.0 - cs) * state.path_sigma[j] + sigma_gain * whitened[j];
  }
  const double ps_norm = norm(next.path_sigma);
  const double gen = static_cast<double>(state.generation + 1);
  const double ps_bias = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen));
  const bool h_sigma =
      ps_norm / ps_bias < (1.4 + 2.0 / (static_cast<double>(n) + 1.0)) * p.chi_n;

  const double cc = p.c_c;
  const double cov_gain = h_sigma ? std::sqrt(cc * (2.0 - cc) * p.mu_eff) : 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    next.path_cov[j] = (1.0 - cc) * state.path_cov[j] + cov_gain * y_w[j];
  }

  // Rank-one plus rank-mu update; the decay term keeps the variance lost when
  // the path update is stalled by h_sigma.
  const double stall = h_sigma ? 0.0 : cc * (2.0 - cc);
  const double decay = 1.0 - p.c_1 - p.c_mu + p.c_1 * stall;
  for (auto& block : next.blocks) {
    const std::size_t off = block.offset;
    const std::size_t size = block.cov.rows();
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = r; c < size; ++c) {
        double rank_mu = 0.0;
        for (std::size_t i = 0; i < p.mu; ++i) rank_mu += p.weights[i] * steps[i][off + r] * steps[i][off + c];
        const double v = decay * block.cov(r, c) +
                         p.c_1 * next.path_cov[off + r] * next.path_cov[off + c] + p.c_mu * rank_mu;
        block.cov(r, c) = v;
        block.cov(c, r) = v;
      }
    }
  }

  next.step_size = std::max(sigma * std::exp((cs / p.d_sigma) * (ps_norm / p.chi_n - 1.0)), kMinStepSize);

  // Re-impose the eigenvalue floor so the stored covariance stays PD.
  for (auto& block : next.blocks) {
    const auto size = static_cast<Eigen::Index>(block.cov.rows());
    Eigen::Map<RowMajor> view(block.cov.data().data(), size, size);
    const Eigen::MatrixXd dense = view;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    const Eigen::VectorXd values = solver.eigenvalues();
    const double floor = kEigenFloor * values.maxCoeff();
    if (values.minCoeff() < floor) {
      const Eigen::MatrixXd& basis = solver.eigenvectors();
      const Eigen::MatrixXd rebuilt = basis * values.cwiseMax(floor).asDiagonal() * basis.transpose();
      view = 0.5 * (rebuilt + rebuilt.transpose());
    }
  }

  next.generation = state.generation + 1;
  return next;
}

Candidate cma_best(std::span<const std::vector<Candidate>> history) {
  const Candidate* best = nullptr;
  for (const auto& generation : history) {
    const Candidate* gen_best = nullptr;
    for (const auto& c : generation) {
      if (gen_best == nullptr || c.fitness < gen_best->fitness ||
          (c.fitness == gen_best->fitness && c.index < gen_best->index)) {
        gen_best = &c;
      }
    }
    // Strict comparison: an earlier generation wins ties.
    if (gen_best != nullptr && (best == nullptr || gen_best->fitness < best->fitness)) best = gen_best;
  }
  if (best == nullptr) throw Error(ErrorCode::kEmptyHistory, "no evaluated candidates");
  return *best;
}

double min_covariance_eigenvalue(const CmaState& state) {
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& b : state.blocks) {
    const Eigen::Map<const RowMajor> view(b.cov.data().data(), static_cast<Eigen::Index>(b.cov.rows()),
                                          static_cast<Eigen::Index>(b.cov.cols()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd(view), Eigen::EigenvaluesOnly);
    smallest = std::min(smallest, solver.eigenvalues().minCoeff());
  }
  return smallest;
}

}  // namespace foro
