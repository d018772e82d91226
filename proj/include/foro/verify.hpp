#pragma once

// Built-in oracle suite behind `foro verify`. The individual routines are
// exported so the acceptance binary runs exactly the same computations.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foro/linalg.hpp"

namespace foro {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Random batched ridge streams. Each stream has `batches` batches of 5..50
/// rows, two new classes per batch, M alternating 16/64 and gamma alternating
/// 0.1/1 unless `gamma` is given.
struct EquivalenceReport {
  std::size_t streams = 0;
  double final_error = 0.0;        // max relative Frobenius error of W after the last batch
  double prefix_error = 0.0;       // max over every prefix
  double permutation_error = 0.0;  // max over every prefix of a shuffled batch order
  double kem_error = 0.0;          // max relative error of R against a direct inverse
};

EquivalenceReport recursive_batch_equivalence(std::size_t streams, std::size_t batches, std::uint64_t seed,
                                              std::optional<double> gamma = std::nullopt);

using Objective = std::function<double(std::span<const double>)>;

/// f(x) = sum x_i^2
double sphere(std::span<const double> x);
/// sum 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2
double rosenbrock(std::span<const double> x);

struct CmaBenchmark {
  double best = 0.0;
  Vector best_genome;
  std::size_t generations = 0;  // generations run until the target was hit or the budget ran out
  bool reached = false;
  bool covariance_ok = true;    // symmetric and positive definite after every generation
};

/// Runs from mean (start, ..., start) until the best-so-far fitness drops below `target`.
CmaBenchmark cma_benchmark(const Objective& f, std::size_t n, std::size_t population, std::size_t max_generations,
                           double target, std::uint64_t seed, double start = 0.0);

struct VerifyOptions {
  bool fast = false;
  std::optional<double> gamma;  // overrides the equivalence streams' gamma; must be positive
};

/// Throws Error(kInvalidConfig) for invalid options before running anything.
std::vector<CheckResult> run_verify(const VerifyOptions& options);

}  // namespace foro
