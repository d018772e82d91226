#include "foro/experiment.hpp"

#include <sys/resource.h>

#include <cmath>
#include <sstream>

#include "foro/error.hpp"
#include "foro/io.hpp"
#include "foro/kernels.hpp"

namespace foro {

TaskStream build_stream(const ExperimentConfig& config) {
  if (config.manifest) return load_feature_stream(*config.manifest);
  if (!config.synthetic) throw Error(ErrorCode::kInvalidConfig, "no stream configured");
  return generate_synthetic(*config.synthetic);
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t threads) {
  config.validate();
  TaskStream stream = build_stream(config);
  const bool patches = stream.kind() == InputKind::kPatches;
  std::optional<BackboneConfig> backbone;
  if (patches) backbone = config.backbone;

  Engine engine(config.engine_config(threads), backbone, stream.input_dim(), config.engine_seeds());

  ExperimentResult result;
  result.config = config;
  result.threads = threads;
  if (engine.backbone()) result.backbone_checksum_before = engine.backbone()->checksum();

  for (std::size_t t = 0; t < stream.size(); ++t) {
    result.reports.push_back(engine.learn_task(stream, t));
    result.accuracy.push_row(engine.evaluate_all(stream, t));
  }

  if (engine.backbone()) result.backbone_checksum_after = engine.backbone()->checksum();
  result.average_accuracy = average_accuracy(result.accuracy, stream.size());
  result.average_forgetting = average_forgetting(result.accuracy, stream.size());
  result.kem = engine.kem();
  result.classifier = engine.classifier();
  result.late_reads = stream.late_reads();
  return result;
}

std::uint64_t peak_rss_bytes() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
  return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024u;  // Linux reports KiB
}

void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "accuracy_matrix.csv", result.accuracy.to_csv());

  std::ostringstream curves;
  curves << "task,generation,best_so_far,generation_best\n";
  for (const TaskReport& r : result.reports) {
    for (std::size_t g = 0; g < r.generation_best.size(); ++g) {
      curves << r.task + 1 << ',' << g + 1 << ',' << format_double(r.best_so_far[g]) << ','
             << format_double(r.generation_best[g]) << '\n';
    }
  }
  write_file_atomic(dir / "curves.csv", curves.str());

  write_checkpoint(dir / "checkpoint.ckpt", result.kem, result.classifier);

  const ExperimentConfig& c = result.config;
  nlohmann::json summary;
  summary["average_accuracy"] = result.average_accuracy;
  summary["average_forgetting"] = result.average_forgetting;
  summary["tasks"] = result.accuracy.rows();
  nlohmann::json wall = nlohmann::json::array();
  nlohmann::json best = nlohmann::json::array();
  for (const TaskReport& r : result.reports) {
    wall.push_back(r.wall_seconds);
    best.push_back(std::isnan(r.best_fitness) ? nlohmann::json(nullptr) : nlohmann::json(r.best_fitness));
  }
  summary["task_wall_seconds"] = wall;
  summary["task_best_fitness"] = best;
  summary["peak_rss_bytes"] = peak_rss_bytes();
  summary["late_train_reads"] = result.late_reads;
  summary["backbone_checksum"] = {{"before", result.backbone_checksum_before},
                                  {"after", result.backbone_checksum_after}};
  const EngineSeeds s = c.engine_seeds();
  summary["seeds"] = {{"master", c.seed},
                      {"backbone", c.backbone_seed()},
                      {"data", c.data_seed()},
                      {"projection", s.projection},
                      {"cma", s.cma},
                      {"minibatch", s.minibatch}};
  summary["threads"] = result.threads;
  summary["kernels"] = std::string(kernels::active().name);
  summary["config"] = to_json(c);
  write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace foro
