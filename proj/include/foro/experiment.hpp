#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "foro/config.hpp"
#include "foro/engine.hpp"
#include "foro/protocol.hpp"

namespace foro {

struct ExperimentResult {
  ExperimentConfig config;
  AccuracyMatrix accuracy;
  std::vector<TaskReport> reports;
  double average_accuracy = 0.0;
  double average_forgetting = 0.0;
  Kem kem;
  Classifier classifier;
  std::size_t late_reads = 0;
  std::uint64_t backbone_checksum_before = 0;
  std::uint64_t backbone_checksum_after = 0;
  std::size_t threads = 1;
};

TaskStream build_stream(const ExperimentConfig& config);

/// Learns every task in order and evaluates on all tasks seen so far after each.
ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t threads = 1);

/// Peak resident set size of this process, in bytes.
std::uint64_t peak_rss_bytes();

/// accuracy_matrix.csv, summary.json, curves.csv, checkpoint.ckpt; each written atomically.
void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace foro
