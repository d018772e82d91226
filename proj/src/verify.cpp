#include "foro/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "foro/cma.hpp"
#include "foro/encoding.hpp"
#include "foro/error.hpp"
#include "foro/kernels.hpp"
#include "foro/protocol.hpp"
#include "foro/rng.hpp"

namespace foro {
namespace {

struct RidgeBatch {
  Matrix x;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint32_t> new_classes;
};

Matrix direct_inverse(const Matrix& x_all, double gamma) {
  const std::size_t m = x_all.cols();
  Eigen::MatrixXd x(x_all.rows(), m);
  for (std::size_t i = 0; i < x_all.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) x(i, j) = x_all(i, j);
  Eigen::MatrixXd a = x.transpose() * x + gamma * Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd inv = a.llt().solve(Eigen::MatrixXd::Identity(m, m));
  Matrix out(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = inv(i, j);
  return out;
}

struct StreamErrors {
  double final_error = 0.0;
  double prefix_error = 0.0;
  double kem_error = 0.0;
};

// Feeds the batches in `order`, comparing against the batch solution on each prefix.
StreamErrors run_stream(const std::vector<RidgeBatch>& batches, std::span<const std::size_t> order, std::size_t m,
                        double gamma) {
  StreamErrors errors;
  Kem kem = kem_init(m, gamma);
  Classifier clf = classifier_init(m);
  Matrix x_all(0, m);
  std::vector<std::uint32_t> labels_all;
  for (std::size_t step = 0; step < order.size(); ++step) {
    const RidgeBatch& b = batches[order[step]];
    clf.extend(b.new_classes);
    kem.absorb(b.x);
    clf.absorb(kem.r, b.x, one_hot(b.labels, clf.class_ids));

    x_all.append_rows(b.x);
    labels_all.insert(labels_all.end(), b.labels.begin(), b.labels.end());
    const Matrix oracle = batch_solve_oracle(x_all, one_hot(labels_all, clf.class_ids), gamma);
    const double err = relative_frobenius(clf.w, oracle);
    errors.prefix_error = std::max(errors.prefix_error, err);
    if (step + 1 == order.size()) {
      errors.final_error = err;
      errors.kem_error = relative_frobenius(kem.r, direct_inverse(x_all, gamma));
    }
  }
  return errors;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << v;
  return out.str();
}

template <typename Fn>
CheckResult timed(std::string name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  try {
    r = fn();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

EquivalenceReport recursive_batch_equivalence(std::size_t streams, std::size_t batches, std::uint64_t seed,
                                              std::optional<double> gamma) {
  if (gamma && !(*gamma > 0.0)) throw Error(ErrorCode::kInvalidConfig, "gamma must be positive");
  EquivalenceReport report;
  report.streams = streams;
  Rng rng(seed);
  for (std::size_t s = 0; s < streams; ++s) {
    const std::size_t m = s % 2 == 0 ? 16 : 64;
    const double g = gamma ? *gamma : ((s / 2) % 2 == 0 ? 0.1 : 1.0);
    std::vector<RidgeBatch> data(batches);
    for (std::size_t t = 0; t < batches; ++t) {
      const std::size_t n = 5 + rng.below(46);
      RidgeBatch& b = data[t];
      b.new_classes = {static_cast<std::uint32_t>(2 * t), static_cast<std::uint32_t>(2 * t + 1)};
      b.x = Matrix(n, m);
      for (std::size_t i = 0; i < n; ++i) {
        b.labels.push_back(b.new_classes[rng.below(2)]);
        for (std::size_t j = 0; j < m; ++j) b.x(i, j) = rng.normal();
      }
    }
    std::vector<std::size_t> order(batches);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const StreamErrors in_order = run_stream(data, order, m, g);
    rng.shuffle(order);
    const StreamErrors shuffled = run_stream(data, order, m, g);

    report.final_error = std::max(report.final_error, in_order.final_error);
    report.prefix_error = std::max(report.prefix_error, in_order.prefix_error);
    report.permutation_error = std::max(report.permutation_error, shuffled.prefix_error);
    report.kem_error = std::max(report.kem_error, std::max(in_order.kem_error, shuffled.kem_error));
  }
  return report;
}

double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double rosenbrock(std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    s += 100.0 * a * a + b * b;
  }
  return s;
}

CmaBenchmark cma_benchmark(const Objective& f, std::size_t n, std::size_t population, std::size_t max_generations,
                           double target, std::uint64_t seed, double start) {
  CmaBenchmark out;
  out.best = std::numeric_limits<double>::infinity();
  CmaState state = cma_init(n, population, seed);
  std::fill(state.mean.begin(), state.mean.end(), start);
  Rng rng(seed);
  for (std::size_t g = 0; g < max_generations; ++g) {
    std::vector<Candidate> cands = cma_ask(state, rng);
    for (Candidate& c : cands) {
      c.fitness = f(c.genome);
      if (c.fitness < out.best) {
        out.best = c.fitness;
        out.best_genome = c.genome;
      }
    }
    state = cma_tell(state, cands);
    out.generations = g + 1;

    for (const CovarianceBlock& b : state.blocks) {
      if (max_asymmetry(b.cov) != 0.0) out.covariance_ok = false;
    }
    if (!(min_covariance_eigenvalue(state) > 0.0)) out.covariance_ok = false;

    if (out.best < target) {
      out.reached = true;
      break;
    }
  }
  return out;
}

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  if (options.gamma && !(*options.gamma > 0.0 && std::isfinite(*options.gamma))) {
    throw Error(ErrorCode::kInvalidConfig, "gamma override must be positive");
  }
  std::vector<CheckResult> results;

  results.push_back(timed("kernels: vector variant matches scalar", [] {
    CheckResult r;
    const kernels::KernelTable& scalar = kernels::scalar_table();
    const kernels::KernelTable& active = kernels::active();
    Rng rng(7);
    double worst = 0.0;
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 17u, 64u, 1001u}) {
      std::vector<double> a(n), b(n), y1(n), y2(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
        y1[i] = y2[i] = rng.normal();
      }
      const double scale = 1.0 + std::sqrt(static_cast<double>(n));
      worst = std::max(worst, std::abs(scalar.dot(a.data(), b.data(), n) - active.dot(a.data(), b.data(), n)) / scale);
      worst = std::max(worst,
                       std::abs(scalar.sq_dist(a.data(), b.data(), n) - active.sq_dist(a.data(), b.data(), n)) / scale);
      scalar.axpy(0.3, a.data(), y1.data(), n);
      active.axpy(0.3, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(y1[i] - y2[i]));
    }
    r.passed = worst <= 1e-12;
    r.detail = std::string(active.name) + " max deviation " + fmt(worst);
    return r;
  }));

  results.push_back(timed("kem: single-row update gives diag(0.5, 1, 1)", [] {
    CheckResult r;
    Kem kem = kem_init(3, 1.0);
    Matrix x(1, 3);
    x(0, 0) = 1.0;
    kem.absorb(x);
    Matrix expected = Matrix::identity(3);
    expected(0, 0) = 0.5;
    const double err = relative_frobenius(kem.r, expected);
    r.passed = err <= 1e-15;
    r.detail = "relative error " + fmt(err);
    return r;
  }));

  const std::size_t streams = options.fast ? 4 : 20;
  results.push_back(timed("equivalence: recursive W equals batch ridge", [&] {
    CheckResult r;
    const EquivalenceReport e = recursive_batch_equivalence(streams, 5, 2024, options.gamma);
    const double worst = std::max({e.final_error, e.prefix_error, e.permutation_error});
    r.passed = worst <= 1e-8 && e.kem_error <= 1e-8;
    r.detail = std::to_string(e.streams) + " streams, max relative Frobenius error " + fmt(worst) +
               " (final " + fmt(e.final_error) + ", prefix " + fmt(e.prefix_error) + ", permuted " +
               fmt(e.permutation_error) + ", R " + fmt(e.kem_error) + ")";
    return r;
  }));

  results.push_back(timed("cma: sphere n=10 K=10 from (3,...,3) below 1e-10 within 300 generations", [] {
    CheckResult r;
    const CmaBenchmark b = cma_benchmark(sphere, 10, 10, 300, 1e-10, 11, 3.0);
    r.passed = b.reached && b.covariance_ok;
    r.detail = "best " + fmt(b.best) + " after " + std::to_string(b.generations) + " generations" +
               (b.covariance_ok ? "" : ", covariance check failed");
    return r;
  }));

  if (!options.fast) {
    results.push_back(timed("cma: rosenbrock n=5 K=12 below 1e-6 within 3000 generations", [] {
      CheckResult r;
      const CmaBenchmark b = cma_benchmark(rosenbrock, 5, 12, 3000, 1e-6, 12);
      r.passed = b.reached && b.covariance_ok;
      r.detail = "best " + fmt(b.best) + " after " + std::to_string(b.generations) + " generations" +
                 (b.covariance_ok ? "" : ", covariance check failed");
      return r;
    }));
  }

  results.push_back(timed("metrics: hand matrix [[0.9],[0.8,0.9]]", [] {
    CheckResult r;
    AccuracyMatrix a;
    a.push_row({Fraction(9, 10)});
    a.push_row({Fraction(8, 10), Fraction(9, 10)});
    const double f = average_forgetting(a, 2);
    const double acc = average_accuracy(a, 2);
    r.passed = f == 0.1 && acc == 0.85;
    r.detail = "forgetting " + format_double(f) + ", accuracy " + format_double(acc);
    return r;
  }));

  return results;
}

}  // namespace foro
