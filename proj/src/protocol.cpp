#include "foro/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "foro/error.hpp"
#include "foro/io.hpp"
#include "foro/rng.hpp"

namespace foro {

TaskStream::TaskStream(std::vector<Task> tasks, StreamMode mode, InputKind kind)
    : tasks_(std::move(tasks)), retired_(tasks_.size(), false), mode_(mode), kind_(kind) {
  validate_stream(tasks_);
}

std::size_t TaskStream::input_dim() const {
  for (const Task& t : tasks_) {
    if (!t.test.inputs.empty()) return t.test.inputs.front().cols();
    if (!t.train.inputs.empty()) return t.train.inputs.front().cols();
  }
  return 0;
}

const SampleSet& TaskStream::train(std::size_t t) {
  if (retired_.at(t)) {
    ++late_reads_;
    throw Error(ErrorCode::kReplayViolation, "training data of task " + std::to_string(t) + " was released");
  }
  return tasks_[t].train;
}

void TaskStream::retire(std::size_t t) {
  retired_.at(t) = true;
  tasks_[t].train = SampleSet{};
}

void validate_stream(std::span<const Task> tasks) {
  std::set<std::uint32_t> seen;
  for (const Task& task : tasks) {
    if (task.class_ids.empty()) throw Error(ErrorCode::kInvalidSpec, "task " + std::to_string(task.task_id) + " has no classes");
    const std::set<std::uint32_t> own(task.class_ids.begin(), task.class_ids.end());
    if (own.size() != task.class_ids.size()) {
      throw Error(ErrorCode::kInvalidSpec, "task " + std::to_string(task.task_id) + " repeats a class id");
    }
    for (std::uint32_t id : own) {
      if (!seen.insert(id).second) {
        throw Error(ErrorCode::kOverlappingClasses,
                    "class " + std::to_string(id) + " appears in more than one task");
      }
    }
    for (const SampleSet* set : {&task.train, &task.test}) {
      if (set->inputs.size() != set->labels.size()) {
        throw Error(ErrorCode::kInvalidSpec, "input/label count mismatch in task " + std::to_string(task.task_id));
      }
      for (std::uint32_t label : set->labels) {
        if (!own.contains(label)) {
          throw Error(ErrorCode::kInvalidSpec, "label " + std::to_string(label) + " outside task " +
                                                   std::to_string(task.task_id) + "'s class set");
        }
      }
    }
  }
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidSpec, msg); };
  if (tasks < 1) fail("tasks must be >= 1");
  if (classes_per_task < 1) fail("classes_per_task must be >= 1");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (kind == SyntheticKind::kPatches && patches < 1) fail("patches must be >= 1");
  if (!(separation > 0.0)) fail("separation must be positive");
  if (!(cluster_std >= 0.0)) fail("cluster_std must be non-negative");
  if (!std::isfinite(shift)) fail("shift must be finite");
  if (train_per_class < 1 || test_per_class < 1) fail("need at least one train and test sample per class");
  if (kind == SyntheticKind::kXor && (tasks != 1 || classes_per_task != 2 || feature_dim != 2)) {
    fail("xor stream is one task, two classes, two dimensions");
  }
}

TaskStream generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t rows = spec.kind == SyntheticKind::kPatches ? spec.patches : 1;
  const std::size_t dim = spec.feature_dim;

  // Draw order: drift direction, then class means in class order, then per
  // task and class the train samples followed by the test samples.
  Vector drift(dim);
  double drift_norm = 0.0;
  for (double& v : drift) {
    v = rng.normal();
    drift_norm += v * v;
  }
  drift_norm = std::sqrt(drift_norm);
  for (double& v : drift) v /= drift_norm;

  const std::size_t total_classes = spec.tasks * spec.classes_per_task;
  std::vector<std::vector<Matrix>> centers(total_classes);
  if (spec.kind == SyntheticKind::kXor) {
    // class 0: (+1,+1), (-1,-1); class 1: (+1,-1), (-1,+1)
    const double corners[2][2][2] = {{{1, 1}, {-1, -1}}, {{1, -1}, {-1, 1}}};
    for (std::size_t c = 0; c < 2; ++c)
      for (const auto& corner : corners[c]) {
        Matrix m(1, 2);
        m(0, 0) = corner[0];
        m(0, 1) = corner[1];
        centers[c].push_back(m);
      }
  } else {
    for (auto& c : centers) {
      Matrix m(rows, dim);
      for (double& v : m.data()) v = spec.separation * rng.normal();
      c.push_back(std::move(m));
    }
  }

  auto draw = [&](const Matrix& center, double offset) {
    Matrix s = center;
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = s.row(r);
      for (std::size_t c = 0; c < dim; ++c) row[c] += spec.cluster_std * rng.normal() + offset * drift[c];
    }
    return s;
  };

  std::vector<Task> tasks(spec.tasks);
  for (std::size_t t = 0; t < spec.tasks; ++t) {
    Task& task = tasks[t];
    task.task_id = static_cast<std::uint32_t>(t);
    const double offset = static_cast<double>(t) * spec.shift;
    for (std::size_t k = 0; k < spec.classes_per_task; ++k) {
      const auto cls = static_cast<std::uint32_t>(t * spec.classes_per_task + k);
      task.class_ids.push_back(cls);
      const auto& modes = centers[cls];
      for (std::size_t i = 0; i < spec.train_per_class; ++i) {
        task.train.inputs.push_back(draw(modes[i % modes.size()], offset));
        task.train.labels.push_back(cls);
      }
      for (std::size_t i = 0; i < spec.test_per_class; ++i) {
        task.test.inputs.push_back(draw(modes[i % modes.size()], offset));
        task.test.labels.push_back(cls);
      }
    }
  }
  const InputKind kind = spec.kind == SyntheticKind::kPatches ? InputKind::kPatches : InputKind::kFeatures;
  return TaskStream(std::move(tasks), StreamMode::kSynthetic, kind);
}

namespace {

SampleSet samples_from(const FeatureFile& file) {
  SampleSet set;
  set.inputs.reserve(file.rows);
  for (std::uint32_t i = 0; i < file.rows; ++i) {
    Matrix row(1, file.cols);
    for (std::uint32_t c = 0; c < file.cols; ++c) row(0, c) = file.values[static_cast<std::size_t>(i) * file.cols + c];
    set.inputs.push_back(std::move(row));
  }
  set.labels = file.labels;
  return set;
}

FeatureFile file_from(const SampleSet& set) {
  FeatureFile f;
  f.rows = static_cast<std::uint32_t>(set.size());
  f.cols = set.inputs.empty() ? 0 : static_cast<std::uint32_t>(set.inputs.front().cols());
  for (const Matrix& m : set.inputs) {
    if (m.rows() != 1 || m.cols() != f.cols) throw Error(ErrorCode::kShapeMismatch, "export needs 1 x d feature rows");
    for (double v : m.data()) f.values.push_back(static_cast<float>(v));
  }
  f.labels = set.labels;
  return f;
}

}  // namespace

TaskStream load_feature_stream(const std::filesystem::path& manifest) {
  if (!std::filesystem::exists(manifest)) throw Error(ErrorCode::kMissingFile, manifest.string());
  nlohmann::json doc;
  try {
    std::ifstream in(manifest);
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, "manifest " + manifest.string() + ": " + e.what());
  }
  const auto base = manifest.parent_path();
  std::vector<Task> tasks;
  try {
    for (const auto& entry : doc.at("tasks")) {
      Task task;
      task.task_id = entry.at("task_id").get<std::uint32_t>();
      task.class_ids = entry.at("class_ids").get<std::vector<std::uint32_t>>();
      const auto& sums = entry.at("sha256");
      for (const char* split : {"train", "test"}) {
        const auto path = base / entry.at(std::string(split) + "_file").get<std::string>();
        if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
        const auto bytes = read_file(path);
        const auto expected = sums.at(split).get<std::string>();
        if (sha256_hex(bytes) != expected) {
          throw Error(ErrorCode::kChecksumMismatch, path.string());
        }
        SampleSet set = samples_from(decode_feature_file(bytes));
        (std::string_view(split) == "train" ? task.train : task.test) = std::move(set);
      }
      tasks.push_back(std::move(task));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, "manifest " + manifest.string() + ": " + e.what());
  }
  return TaskStream(std::move(tasks), StreamMode::kFeatureFile, InputKind::kFeatures);
}

std::filesystem::path export_feature_stream(const TaskStream& stream, const std::filesystem::path& dir) {
  if (stream.kind() != InputKind::kFeatures) throw Error(ErrorCode::kInvalidSpec, "only feature streams export");
  std::filesystem::create_directories(dir);
  nlohmann::json doc;
  doc["version"] = 1;
  doc["tasks"] = nlohmann::json::array();
  for (std::size_t t = 0; t < stream.size(); ++t) {
    const Task& task = stream.task(t);
    nlohmann::json entry;
    entry["task_id"] = task.task_id;
    entry["class_ids"] = task.class_ids;
    for (const auto& [split, set] : {std::pair<std::string, const SampleSet*>{"train", &task.train},
                                     std::pair<std::string, const SampleSet*>{"test", &task.test}}) {
      const std::string name = "task" + std::to_string(task.task_id) + "_" + split + ".feat";
      const auto bytes = encode_feature_file(file_from(*set));
      write_file_atomic(dir / name, bytes);
      entry[split + "_file"] = name;
      entry["sha256"][split] = sha256_hex(bytes);
    }
    doc["tasks"].push_back(entry);
  }
  const auto path = dir / "manifest.json";
  write_file_atomic(path, doc.dump(2) + "\n");
  return path;
}

void AccuracyMatrix::push_row(std::vector<Fraction> row) {
  if (row.size() != rows_.size() + 1) {
    throw Error(ErrorCode::kIncompleteMatrix, "row " + std::to_string(rows_.size() + 1) + " needs " +
                                                  std::to_string(rows_.size() + 1) + " entries");
  }
  rows_.push_back(std::move(row));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string AccuracyMatrix::to_csv() const {
  std::ostringstream out;
  out << "j,t,accuracy\n";
  for (std::size_t j = 0; j < rows_.size(); ++j)
    for (std::size_t t = 0; t <= j; ++t) out << j + 1 << ',' << t + 1 << ',' << format_double(to_double(rows_[j][t])) << '\n';
  return out.str();
}

double average_accuracy(const AccuracyMatrix& a, std::size_t tasks) {
  if (tasks < 1 || a.rows() < tasks) {
    throw Error(ErrorCode::kIncompleteMatrix, "row " + std::to_string(tasks) + " not available");
  }
  Fraction sum = 0;
  for (const Fraction& f : a.row(tasks - 1)) sum += f;
  return to_double(sum / static_cast<std::int64_t>(tasks));
}

double average_forgetting(const AccuracyMatrix& a, std::size_t tasks) {
  if (tasks < 1 || a.rows() < tasks) {
    throw Error(ErrorCode::kIncompleteMatrix, "row " + std::to_string(tasks) + " not available");
  }
  if (tasks == 1) return 0.0;
  const std::size_t last = tasks - 1;
  Fraction sum = 0;
  for (std::size_t t = 0; t < last; ++t) {
    Fraction peak_drop = a.at(t, t) - a.at(last, t);
    for (std::size_t j = t + 1; j < last; ++j) peak_drop = std::max(peak_drop, a.at(j, t) - a.at(last, t));
    sum += peak_drop;
  }
  return to_double(sum / static_cast<std::int64_t>(last));
}

}  // namespace foro
