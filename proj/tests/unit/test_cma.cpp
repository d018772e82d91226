#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "foro/cma.hpp"
#include "foro/verify.hpp"
#include "frozen_oracles.hpp"
#include "helpers.hpp"

using namespace foro;

namespace {

void check_constants(const StrategyParams& p, std::span<const double> weights, std::span<const double> c) {
  REQUIRE(p.weights.size() == weights.size());
  CHECK(test::max_abs_diff(p.weights, weights) <= 1e-15);
  CHECK(p.mu_eff == doctest::Approx(c[0]).epsilon(1e-14));
  CHECK(p.c_sigma == doctest::Approx(c[1]).epsilon(1e-14));
  CHECK(p.d_sigma == doctest::Approx(c[2]).epsilon(1e-14));
  CHECK(p.c_c == doctest::Approx(c[3]).epsilon(1e-14));
  CHECK(p.c_1 == doctest::Approx(c[4]).epsilon(1e-14));
  CHECK(p.c_mu == doctest::Approx(c[5]).epsilon(1e-14));
  CHECK(p.chi_n == doctest::Approx(c[6]).epsilon(1e-14));
}

std::vector<Candidate> evaluate(std::vector<Candidate> cands, const Objective& f) {
  for (Candidate& c : cands) c.fitness = f(c.genome);
  return cands;
}

}  // namespace

TEST_SUITE("cma") {
  TEST_CASE("init: zero mean, identity covariance, unit step") {
    const CmaState s = cma_init(4, 6, 7);
    CHECK(s.mean == Vector(4, 0.0));
    CHECK(s.step_size == 1.0);
    CHECK(s.covariance() == Matrix::identity(4));
    CHECK(s.path_sigma == Vector(4, 0.0));
    CHECK(s.path_cov == Vector(4, 0.0));
    CHECK(s.generation == 0);
    CHECK(s.params.mu == 3);

    const CmaState tiny = cma_init(1, 2, 0);
    CHECK(tiny.covariance() == Matrix::identity(1));
    CHECK(tiny.params.mu == 1);
  }

  TEST_CASE("init rejects K < 2 and n < 1") {
    CHECK_FORO_ERROR(cma_init(4, 1, 0), ErrorCode::kInvalidDimension);
    CHECK_FORO_ERROR(cma_init(0, 6, 0), ErrorCode::kInvalidDimension);
    CHECK_FORO_ERROR(cma_init(10, 6, 0, CovarianceMode::kBlockDiagonal, 3), ErrorCode::kInvalidDimension);
  }

  TEST_CASE("strategy constants match the tutorial formulas") {
    check_constants(default_strategy(4, 6), oracle::kCmaWeights_n4_k6, oracle::kCmaConstants_n4_k6);
    check_constants(default_strategy(10, 10), oracle::kCmaWeights_n10_k10, oracle::kCmaConstants_n10_k10);
    check_constants(default_strategy(48, 4), oracle::kCmaWeights_n48_k4, oracle::kCmaConstants_n48_k4);
  }

  TEST_CASE("ask: empirical moments of the initial distribution") {
    const CmaState s = cma_init(4, 6, 7);
    Rng rng(123);
    std::vector<double> sum(4, 0.0), sq(4, 0.0);
    std::size_t draws = 0;
    while (draws < 100000) {
      for (const Candidate& c : cma_ask(s, rng)) {
        for (std::size_t i = 0; i < 4; ++i) {
          sum[i] += c.genome[i];
          sq[i] += c.genome[i] * c.genome[i];
        }
        ++draws;
      }
    }
    for (std::size_t i = 0; i < 4; ++i) {
      const double mean = sum[i] / static_cast<double>(draws);
      const double var = sq[i] / static_cast<double>(draws) - mean * mean;
      CHECK(std::abs(mean) <= 0.02);
      CHECK(std::abs(var - 1.0) <= 0.02);
    }
  }

  TEST_CASE("ask: indices in sampling order and zero step returns the mean") {
    CmaState s = cma_init(5, 6, 1);
    s.mean = {1, -2, 3, 0.5, 7};
    Rng rng(4);
    const auto cands = cma_ask(s, rng);
    REQUIRE(cands.size() == 6);
    for (std::size_t k = 0; k < cands.size(); ++k) CHECK(cands[k].index == k);

    s.step_size = 0.0;
    s.blocks[0].cov(0, 1) = s.blocks[0].cov(1, 0) = 0.4;
    for (const Candidate& c : cma_ask(s, rng)) CHECK(c.genome == s.mean);
  }

  TEST_CASE("ask is a pure function of state and seed") {
    const CmaState s = cma_init(6, 5, 2);
    Rng a(77), b(77);
    const auto x = cma_ask(s, a);
    const auto y = cma_ask(s, b);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(x[k].genome == y[k].genome);
  }

  TEST_CASE("ask rejects an indefinite covariance") {
    CmaState s = cma_init(3, 4, 0);
    s.blocks[0].cov(2, 2) = -1.0;
    Rng rng(0);
    CHECK_FORO_ERROR(cma_ask(s, rng), ErrorCode::kCovarianceNotPd);
  }

  TEST_CASE("tell rejects non-finite fitness and wrong counts") {
    const CmaState s = cma_init(3, 4, 0);
    Rng rng(0);
    auto cands = evaluate(cma_ask(s, rng), sphere);
    cands[2].fitness = std::numeric_limits<double>::infinity();
    CHECK_FORO_ERROR(cma_tell(s, cands), ErrorCode::kNonFiniteFitness);
    cands[2].fitness = std::nan("");
    CHECK_FORO_ERROR(cma_tell(s, cands), ErrorCode::kNonFiniteFitness);
    cands.pop_back();
    cands[2].fitness = 1.0;
    CHECK_THROWS(cma_tell(s, cands));
  }

  TEST_CASE("ties: elite is the first floor(K/2) by sampling index") {
    const CmaState s = cma_init(4, 6, 0);
    Rng rng(10);
    auto cands = cma_ask(s, rng);
    for (Candidate& c : cands) c.fitness = 1.0;
    const CmaState next = cma_tell(s, cands);
    for (std::size_t i = 0; i < 4; ++i) {
      double expected = 0.0;
      for (std::size_t r = 0; r < 3; ++r) expected += s.params.weights[r] * cands[r].genome[i];
      CHECK(next.mean[i] == doctest::Approx(expected).epsilon(1e-14));
    }
    // Presentation order must not matter, only the index field.
    auto reversed = cands;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(cma_tell(s, reversed).mean == next.mean);
  }

  TEST_CASE("ranking is invariant under increasing transforms of fitness") {
    CmaState s = cma_init(5, 8, 0);
    Rng rng(5);
    for (int g = 0; g < 4; ++g) {
      auto cands = evaluate(cma_ask(s, rng), rosenbrock);
      auto shifted = cands;
      for (Candidate& c : shifted) c.fitness = 2.0 * c.fitness + 1.0;
      const CmaState a = cma_tell(s, cands);
      const CmaState b = cma_tell(s, shifted);
      CHECK(a.mean == b.mean);
      CHECK(a.step_size == b.step_size);
      CHECK(a.covariance() == b.covariance());
      s = a;
    }
  }

  TEST_CASE("covariance stays symmetric positive definite every generation") {
    CmaState s = cma_init(6, 6, 0);
    Rng rng(8);
    for (int g = 0; g < 200; ++g) {
      s = cma_tell(s, evaluate(cma_ask(s, rng), rosenbrock));
      CHECK(max_asymmetry(s.covariance()) < 1e-10);
      CHECK(min_covariance_eigenvalue(s) > 0.0);
      CHECK(s.step_size >= kMinStepSize);
    }
  }

  TEST_CASE("step size floor on a flat landscape") {
    CmaState s = cma_init(3, 6, 0);
    Rng rng(1);
    for (int g = 0; g < 3000; ++g) {
      auto cands = cma_ask(s, rng);
      for (Candidate& c : cands) c.fitness = static_cast<double>(c.index);
      s = cma_tell(s, cands);
    }
    CHECK(s.step_size >= kMinStepSize);
    CHECK(min_covariance_eigenvalue(s) > 0.0);
  }

  TEST_CASE("sphere from (3,...,3) converges and cma_best finds the origin") {
    CmaState s = cma_init(10, 10, 11);
    std::fill(s.mean.begin(), s.mean.end(), 3.0);
    Rng rng(11);
    std::vector<std::vector<Candidate>> history;
    double best_so_far = std::numeric_limits<double>::infinity();
    for (int g = 0; g < 300 && best_so_far >= 1e-10; ++g) {
      auto cands = evaluate(cma_ask(s, rng), sphere);
      s = cma_tell(s, cands);
      for (const Candidate& c : cands) best_so_far = std::min(best_so_far, c.fitness);
      history.push_back(std::move(cands));
    }
    CHECK(best_so_far < 1e-10);
    const Candidate best = cma_best(history);
    CHECK(best.fitness == best_so_far);
    for (double v : best.genome) CHECK(std::abs(v) <= 1e-4);
  }

  TEST_CASE("benchmarks") {
    const CmaBenchmark sph = cma_benchmark(sphere, 10, 10, 300, 1e-10, 11, 3.0);
    CHECK(sph.reached);
    CHECK(sph.covariance_ok);
    const CmaBenchmark ros = cma_benchmark(rosenbrock, 5, 12, 3000, 1e-6, 12);
    CHECK(ros.reached);
    CHECK(ros.covariance_ok);
  }

  TEST_CASE("cma_best ordering and tie-breaks") {
    CHECK_FORO_ERROR(cma_best({}), ErrorCode::kEmptyHistory);
    std::vector<std::vector<Candidate>> h{{Candidate{{1.0}, 0.5, 0}}};
    CHECK(cma_best(h).fitness == 0.5);
    h[0].push_back(Candidate{{2.0}, 0.3, 1});
    CHECK(cma_best(h).genome == Vector{2.0});
    h.push_back({Candidate{{3.0}, 0.3, 0}});
    CHECK(cma_best(h).genome == Vector{2.0});  // earlier generation wins
    h[0].push_back(Candidate{{4.0}, 0.3, 2});
    h[0][1].index = 3;
    CHECK(cma_best(h).genome == Vector{4.0});  // lower index within a generation
  }

  TEST_CASE("block-diagonal covariance") {
    CmaState full = cma_init(6, 6, 0);
    CmaState one = cma_init(6, 6, 0, CovarianceMode::kBlockDiagonal, 1);
    CmaState three = cma_init(6, 6, 0, CovarianceMode::kBlockDiagonal, 3);
    CHECK(three.blocks.size() == 3);
    Rng r1(3), r2(3), r3(3);
    for (int g = 0; g < 30; ++g) {
      full = cma_tell(full, evaluate(cma_ask(full, r1), rosenbrock));
      one = cma_tell(one, evaluate(cma_ask(one, r2), rosenbrock));
      three = cma_tell(three, evaluate(cma_ask(three, r3), rosenbrock));
    }
    // One block is the full-covariance strategy.
    CHECK(full.mean == one.mean);
    CHECK(full.covariance() == one.covariance());
    const Matrix c = three.covariance();
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        if (i / 2 != j / 2) CHECK(c(i, j) == 0.0);
    CHECK(min_covariance_eigenvalue(three) > 0.0);
  }
}
