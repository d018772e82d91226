#pragma once

// Class-incremental task streams and the accuracy/forgetting metrics.

#include <boost/rational.hpp>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "foro/linalg.hpp"

namespace foro {

enum class StreamMode { kSynthetic, kFeatureFile };

enum class InputKind {
  kPatches,   // m x d patch grids, routed through the backbone
  kFeatures,  // 1 x d feature rows, projected directly
};

struct SampleSet {
  std::vector<Matrix> inputs;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

struct Task {
  std::uint32_t task_id = 0;
  std::vector<std::uint32_t> class_ids;
  SampleSet train;
  SampleSet test;
};

/// Ordered tasks with disjoint class sets. Training data is handed out one
/// task at a time: once a task is retired its training samples are released
/// and every later request is counted and refused.
class TaskStream {
 public:
  TaskStream() = default;
  TaskStream(std::vector<Task> tasks, StreamMode mode, InputKind kind);

  std::size_t size() const noexcept { return tasks_.size(); }
  StreamMode mode() const noexcept { return mode_; }
  InputKind kind() const noexcept { return kind_; }
  /// Width of each input row.
  std::size_t input_dim() const;

  const Task& task(std::size_t t) const { return tasks_.at(t); }
  /// Throws Error(kReplayViolation) for retired tasks.
  const SampleSet& train(std::size_t t);
  const SampleSet& test(std::size_t t) const { return tasks_.at(t).test; }

  /// Drops task t's training samples for good.
  void retire(std::size_t t);
  std::size_t late_reads() const noexcept { return late_reads_; }

 private:
  std::vector<Task> tasks_;
  std::vector<bool> retired_;
  StreamMode mode_ = StreamMode::kSynthetic;
  InputKind kind_ = InputKind::kFeatures;
  std::size_t late_reads_ = 0;
};

/// Throws Error(kOverlappingClasses) or Error(kInvalidSpec).
void validate_stream(std::span<const Task> tasks);

enum class SyntheticKind {
  kPatches,   // patch grids for full prompt search
  kFeatures,  // raw feature vectors
  kXor,       // four clusters at (+-1, +-1), label = sign product; one task, two classes
};

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kFeatures;
  std::size_t tasks = 5;
  std::size_t classes_per_task = 4;
  std::size_t feature_dim = 16;  // d for features; d of each patch row
  std::size_t patches = 8;       // m, patch kind only
  double separation = 5.0;       // scale of the class means
  double cluster_std = 1.0;
  double shift = 0.0;            // task t is offset by t * shift along a fixed unit direction
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

TaskStream generate_synthetic(const SyntheticSpec& spec);

/// Reads a manifest and its FOROFEAT files; verifies checksums and disjointness.
TaskStream load_feature_stream(const std::filesystem::path& manifest);

/// Writes a feature-kind stream as FOROFEAT files plus manifest.json in `dir`.
/// Returns the manifest path.
std::filesystem::path export_feature_stream(const TaskStream& stream, const std::filesystem::path& dir);

// ---------------------------------------------------------------- metrics

/// Accuracies are exact fractions (correct / total) so the metrics can be
/// evaluated without rounding and converted once.
using Fraction = boost::rational<std::int64_t>;

inline double to_double(const Fraction& f) {
  return static_cast<double>(f.numerator()) / static_cast<double>(f.denominator());
}

/// Lower-triangular grid; row j (0-based) holds accuracies on tasks 0..j after learning task j.
class AccuracyMatrix {
 public:
  void push_row(std::vector<Fraction> row);
  std::size_t rows() const noexcept { return rows_.size(); }
  const Fraction& at(std::size_t j, std::size_t t) const { return rows_.at(j).at(t); }
  const std::vector<Fraction>& row(std::size_t j) const { return rows_.at(j); }

  /// "j,t,accuracy" with 1-based j and t.
  std::string to_csv() const;

 private:
  std::vector<std::vector<Fraction>> rows_;
};

/// Mean of row T (1-based task count). Throws Error(kIncompleteMatrix).
double average_accuracy(const AccuracyMatrix& a, std::size_t tasks);

/// Mean over t < T of max_{t <= j < T} a[j][t] - a[T][t]; 0 when T = 1.
double average_forgetting(const AccuracyMatrix& a, std::size_t tasks);

/// Shortest decimal string that round-trips.
std::string format_double(double v);

}  // namespace foro
