#include <doctest.h>

#include <random>

#include "foro/backbone.hpp"
#include "frozen_oracles.hpp"
#include "helpers.hpp"

using namespace foro;

namespace {

std::vector<Matrix> random_inputs(std::size_t n, const BackboneConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(test::random_matrix(c.patches, c.embed_dim, rng));
  return out;
}

}  // namespace

TEST_SUITE("backbone") {
  TEST_CASE("seeded generator matches the reference stream") {
    std::mt19937_64 reference(5489);
    CHECK(reference() == oracle::kMt64Seed5489First);
    Rng rng(2024);
    for (double expected : oracle::kRngNormalsSeed2024) CHECK(rng.normal() == doctest::Approx(expected).epsilon(1e-15));
  }

  TEST_CASE("forward matches the independent reference implementation") {
    const Backbone bb(BackboneConfig{});
    const Matrix prompts = test::from_values(oracle::kBackbonePrompts, 2, 16);
    const Matrix patches = test::from_values(oracle::kBackbonePatches, 8, 16);
    const LayerTrace trace = bb.forward(bb.sequence(prompts, patches));
    REQUIRE(trace.cls_per_layer.size() == 4);
    for (std::size_t l = 0; l < 4; ++l) {
      CAPTURE(l);
      CHECK(test::max_abs_diff(trace.cls_per_layer[l], std::span(oracle::kBackboneClsPerLayer + 16 * l, 16)) <= 1e-10);
    }
    const LayerTrace bare = bb.forward(bb.sequence(Matrix(0, 16), patches));
    CHECK(test::max_abs_diff(bare.final_cls(), oracle::kBackboneClsNoPrompt) <= 1e-10);
  }

  TEST_CASE("construction is deterministic in the seed") {
    BackboneConfig c;
    const Backbone a(c), b(c);
    CHECK(a.checksum() == b.checksum());
    c.seed = 43;
    CHECK(Backbone(c).checksum() != a.checksum());
    const auto inputs = random_inputs(3, c, 1);
    const Matrix p(3, 16, 0.25);
    CHECK(batch_forward(a, p, inputs).features == batch_forward(b, p, inputs).features);
  }

  TEST_CASE("shapes") {
    BackboneConfig c;
    c.layers = 3;
    c.embed_dim = 12;
    c.heads = 3;
    c.patches = 5;
    const Backbone bb(c);
    const auto inputs = random_inputs(4, c, 2);
    const BatchFeatures f = batch_forward(bb, Matrix(2, 12), inputs);
    CHECK(f.features.rows() == 4);
    CHECK(f.features.cols() == 12);
    CHECK(f.stats.mean.size() == 3);
    CHECK(f.stats.std.size() == 3);
    CHECK(f.stats.mean[2].size() == 12);
  }

  TEST_CASE("invalid configurations") {
    BackboneConfig c;
    c.heads = 3;  // does not divide 16
    CHECK_FORO_ERROR(Backbone{c}, ErrorCode::kInvalidConfig);
    c = BackboneConfig{};
    c.layers = 0;
    CHECK_FORO_ERROR(Backbone{c}, ErrorCode::kInvalidConfig);
  }

  TEST_CASE("mismatched inputs") {
    const Backbone bb(BackboneConfig{});
    CHECK_FORO_ERROR(bb.forward(bb.sequence(Matrix(1, 16), Matrix(8, 15))), ErrorCode::kDimensionMismatch);
    CHECK_FORO_ERROR(bb.forward(bb.sequence(Matrix(1, 15), Matrix(8, 16))), ErrorCode::kDimensionMismatch);
    CHECK_FORO_ERROR(bb.forward(bb.sequence(Matrix(1, 16), Matrix(7, 16))), ErrorCode::kDimensionMismatch);
    CHECK_FORO_ERROR(batch_forward(bb, Matrix(1, 16), {}), ErrorCode::kEmptyBatch);
    CHECK_FORO_ERROR(reshape(Vector(10), 3, 3), ErrorCode::kDimensionMismatch);
  }

  TEST_CASE("one prompt entry moves the output") {
    const Backbone bb(BackboneConfig{});
    const auto inputs = random_inputs(1, bb.config(), 3);
    Matrix p(3, 16, 0.1);
    const Vector before = bb.forward(bb.sequence(p, inputs[0])).final_cls();
    p(1, 5) += 1.0;
    const Vector after = bb.forward(bb.sequence(p, inputs[0])).final_cls();
    CHECK(test::max_abs_diff(before, after) > 1e-6);
  }

  TEST_CASE("batch statistics") {
    const Backbone bb(BackboneConfig{});
    const auto inputs = random_inputs(5, bb.config(), 4);
    const Matrix p(3, 16, -0.2);

    const BatchFeatures one = batch_forward(bb, p, std::span(inputs).first(1));
    for (const Vector& sd : one.stats.std)
      for (double v : sd) CHECK(v == 0.0);

    const std::vector<Matrix> twice{inputs[0], inputs[0]};
    const BatchFeatures dup = batch_forward(bb, p, twice);
    for (std::size_t l = 0; l < 4; ++l) {
      const Vector single = bb.forward(bb.sequence(p, inputs[0])).cls_per_layer[l];
      CHECK(test::max_abs_diff(dup.stats.mean[l], single) <= 1e-15);
      for (double v : dup.stats.std[l]) CHECK(v == 0.0);
    }

    const BatchFeatures all = batch_forward(bb, p, inputs);
    for (std::size_t c = 0; c < 16; ++c) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < 5; ++i) mean += all.features(i, c);
      mean /= 5.0;
      for (std::size_t i = 0; i < 5; ++i) sq += (all.features(i, c) - mean) * (all.features(i, c) - mean);
      CHECK(all.stats.mean[3][c] == doctest::Approx(mean).epsilon(1e-13));
      CHECK(all.stats.std[3][c] == doctest::Approx(std::sqrt(sq / 5.0)).epsilon(1e-12));
    }
  }

  TEST_CASE("forward does not modify weights") {
    const Backbone bb(BackboneConfig{});
    const std::uint64_t before = bb.checksum();
    (void)batch_forward(bb, Matrix(3, 16, 1.0), random_inputs(6, bb.config(), 5));
    CHECK(bb.checksum() == before);
  }
}
