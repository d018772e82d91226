#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>

#include "foro/io.hpp"
#include "helpers.hpp"

using namespace foro;

namespace {

std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | static_cast<std::uint32_t>(b[off + 1]) << 8 |
         static_cast<std::uint32_t>(b[off + 2]) << 16 | static_cast<std::uint32_t>(b[off + 3]) << 24;
}

Checkpoint sample_checkpoint() {
  Rng rng(4);
  Kem k = kem_init(6, 0.25);
  k.absorb(test::random_matrix(9, 6, rng));
  Classifier c = classifier_init(6);
  c.extend(std::vector<std::uint32_t>{11, 3, 8});
  c.w = test::random_matrix(6, 3, rng);
  return {k, c};
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("sha256 of a known string") {
    const std::string abc = "abc";
    CHECK(sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("feature file layout") {
    FeatureFile f;
    f.rows = 2;
    f.cols = 3;
    f.values = {1.5f, -2.0f, 0.25f, 3.0f, 4.0f, -0.0f};
    f.labels = {7, 9};
    const auto bytes = encode_feature_file(f);
    REQUIRE(bytes.size() == 8 + 2 + 4 + 4 + 6 * 4 + 2 * 4);
    CHECK(std::memcmp(bytes.data(), "FOROFEAT", 8) == 0);
    CHECK(bytes[8] == 1);
    CHECK(bytes[9] == 0);
    CHECK(u32_at(bytes, 10) == 2);
    CHECK(u32_at(bytes, 14) == 3);
    CHECK(u32_at(bytes, 18) == std::bit_cast<std::uint32_t>(1.5f));
    CHECK(u32_at(bytes, 18 + 24) == 7);

    const FeatureFile back = decode_feature_file(bytes);
    CHECK(back.values == f.values);
    CHECK(back.labels == f.labels);
    CHECK(encode_feature_file(back) == bytes);
    CHECK(back.features()(1, 0) == 3.0);
  }

  TEST_CASE("corrupt feature files") {
    FeatureFile f;
    f.rows = 1;
    f.cols = 2;
    f.values = {1.0f, 2.0f};
    f.labels = {0};
    auto bytes = encode_feature_file(f);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_FORO_ERROR(decode_feature_file(truncated), ErrorCode::kCorruptFeatureFile);
    auto longer = bytes;
    longer.push_back(0);
    CHECK_FORO_ERROR(decode_feature_file(longer), ErrorCode::kCorruptFeatureFile);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_FORO_ERROR(decode_feature_file(magic), ErrorCode::kCorruptFeatureFile);
    auto version = bytes;
    version[8] = 2;
    CHECK_FORO_ERROR(decode_feature_file(version), ErrorCode::kCorruptFeatureFile);
    CHECK_FORO_ERROR(decode_feature_file({}), ErrorCode::kCorruptFeatureFile);
  }

  TEST_CASE("checkpoint round-trip is exact") {
    const Checkpoint ck = sample_checkpoint();
    const auto bytes = encode_checkpoint(ck.kem, ck.classifier);
    CHECK(std::memcmp(bytes.data(), "FOROCKPT", 8) == 0);
    CHECK(u32_at(bytes, 10) == 6);
    CHECK(u32_at(bytes, 14) == 3);
    CHECK(u32_at(bytes, 18) == 11);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.kem.r == ck.kem.r);
    CHECK(back.kem.gamma == 0.25);
    CHECK(back.kem.samples_seen == 9);
    CHECK(back.classifier.w == ck.classifier.w);
    CHECK(back.classifier.class_ids == ck.classifier.class_ids);
  }

  TEST_CASE("corrupt checkpoints") {
    const Checkpoint ck = sample_checkpoint();
    const auto bytes = encode_checkpoint(ck.kem, ck.classifier);
    for (std::size_t cut : {0ul, 5ul, 12ul, 20ul, bytes.size() / 2, bytes.size() - 1}) {
      CAPTURE(cut);
      CHECK_FORO_ERROR(decode_checkpoint(std::span(bytes).first(cut)), ErrorCode::kCorruptCheckpoint);
    }
    auto huge = bytes;
    huge[17] = 0x7f;  // class count far beyond the file
    CHECK_FORO_ERROR(decode_checkpoint(huge), ErrorCode::kCorruptCheckpoint);
  }

  TEST_CASE("atomic writes leave no temp files") {
    const auto dir = std::filesystem::temp_directory_path() / "foro_test_atomic";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const Checkpoint ck = sample_checkpoint();
    write_checkpoint(dir / "a.ckpt", ck.kem, ck.classifier);
    write_checkpoint(dir / "a.ckpt", ck.kem, ck.classifier);
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      ++files;
      CHECK(e.path().filename() == "a.ckpt");
    }
    CHECK(files == 1);
    CHECK(read_checkpoint(dir / "a.ckpt").kem.r == ck.kem.r);
    CHECK_FORO_ERROR(read_checkpoint(dir / "missing.ckpt"), ErrorCode::kMissingFile);
  }

  TEST_CASE("fresh KEM checkpoint is isotropic") {
    const Kem k = kem_init(32, 0.1);
    Classifier c = classifier_init(32);
    const Checkpoint back = decode_checkpoint(encode_checkpoint(k, c));
    CHECK(spd_condition_estimate(back.kem.r) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(back.classifier.class_count() == 0);
  }
}
