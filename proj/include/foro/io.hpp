#pragma once

// On-disk formats. All integers and floats are little-endian.
//
// Feature file:  "FOROFEAT" | u16 version | u32 n | u32 d | n*d f32 row-major | n u32 labels
// Checkpoint:    "FOROCKPT" | u16 version | u32 M | u32 c | c u32 class ids
//                | f64 gamma | u64 samples seen | M*M f64 R | M*c f64 W   (row-major)

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "foro/encoding.hpp"
#include "foro/linalg.hpp"

namespace foro {

inline constexpr std::uint16_t kFeatureFileVersion = 1;
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct FeatureFile {
  std::vector<float> values;  // n x d row-major, exactly as stored
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint32_t> labels;

  Matrix features() const;
};

std::vector<std::uint8_t> encode_feature_file(const FeatureFile& file);
/// Throws Error(kCorruptFeatureFile) on bad magic, version or length.
FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes);

struct Checkpoint {
  Kem kem;
  Classifier classifier;
};

std::vector<std::uint8_t> encode_checkpoint(const Kem& kem, const Classifier& clf);
/// Throws Error(kCorruptCheckpoint).
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const Kem& kem, const Classifier& clf);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace foro
