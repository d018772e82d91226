#include "foro/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include "foro/error.hpp"
#include "foro/rng.hpp"

namespace foro {
namespace {

// Epoch-style minibatches: a seeded permutation is consumed in order and
// redrawn once too few indices remain.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t population, std::size_t batch, std::uint64_t seed)
      : population_(population), batch_(std::min(batch, population)), rng_(seed) {
    reshuffle();
  }

  std::vector<std::size_t> next() {
    if (cursor_ + batch_ > order_.size()) reshuffle();
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    order_.resize(population_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
    cursor_ = 0;
  }

  std::size_t population_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kForo: return "foro";
    case Mode::kKemOnly: return "kem-only";
    case Mode::kFitnessOnly: return "fitness-only";
  }
  return "foro";
}

Mode parse_mode(std::string_view name) {
  if (name == "foro") return Mode::kForo;
  if (name == "kem-only") return Mode::kKemOnly;
  if (name == "fitness-only") return Mode::kFitnessOnly;
  throw Error(ErrorCode::kInvalidConfig, "unknown mode '" + std::string(name) + "'");
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("FORO_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Engine::Engine(const EngineConfig& config, std::optional<BackboneConfig> backbone, std::size_t input_dim,
               const EngineSeeds& seeds)
    : config_(config), seeds_(seeds) {
  if (backbone) {
    backbone_.emplace(*backbone);
    if (input_dim != backbone_->dim()) {
      throw Error(ErrorCode::kInvalidConfig, "input width " + std::to_string(input_dim) +
                                                 " != embed_dim " + std::to_string(backbone_->dim()));
    }
  } else if (searches()) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string(to_string(config_.mode)) + " mode needs patch inputs; feature inputs cannot respond to prompts");
  }
  if (searches() && config_.prompts == 0) throw Error(ErrorCode::kInvalidConfig, "prompt search needs prompts >= 1");

  projection_ = nrp_build(input_dim, config_.nrp_dim, config_.activation, seeds_.projection);
  kem_ = kem_init(config_.nrp_dim, config_.gamma);
  classifier_ = classifier_init(config_.nrp_dim);
  history_.alpha = config_.alpha;

  const std::size_t d = backbone_ ? backbone_->dim() : input_dim;
  prompt_ = Matrix(backbone_ ? config_.prompts : 0, d);
  if (searches()) {
    cma_ = cma_init(config_.prompts * d, config_.population, seeds_.cma, config_.covariance, config_.prompts);
  }
}

Matrix Engine::features(std::span<const Matrix> inputs) const {
  if (backbone_) return batch_forward(*backbone_, prompt_, inputs).features;
  Matrix out;
  for (const Matrix& row : inputs) out.append_rows(row);
  return out;
}

Matrix Engine::encode(std::span<const Matrix> inputs) const { return nrp_project(projection_, features(inputs)); }

void Engine::search_prompt(const SampleSet& train, const Task& task, TaskReport& report) {
  const std::size_t d = backbone_->dim();
  MinibatchSampler sampler(train.size(), config_.fitness.eval_batch, derive_seed(seeds_.minibatch, task.task_id));
  std::vector<std::vector<Candidate>> history;
  double running = std::numeric_limits<double>::infinity();

  for (std::size_t g = 0; g < config_.fitness.generations; ++g) {
    std::vector<Matrix> inputs;
    std::vector<std::uint32_t> labels;
    for (std::size_t i : sampler.next()) {
      inputs.push_back(train.inputs[i]);
      labels.push_back(train.labels[i]);
    }
    const EvalBatch batch{inputs, one_hot(labels, task.class_ids)};
    const FitnessContext ctx{*backbone_, projection_, history_, config_.fitness, config_.gamma, config_.prompts};

    Rng rng(derive_seed(seeds_.cma, generations_run_++));
    std::vector<Candidate> candidates = cma_ask(cma_, rng);
    std::vector<double> fitness(candidates.size());
    parallel_for(candidates.size(), config_.threads,
                 [&](std::size_t k) { fitness[k] = evaluate_candidate(candidates[k], batch, ctx).total; });
    double generation_best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      candidates[k].fitness = fitness[k];
      generation_best = std::min(generation_best, fitness[k]);
    }
    cma_ = cma_tell(cma_, candidates);
    running = std::min(running, generation_best);
    report.generation_best.push_back(generation_best);
    report.best_so_far.push_back(running);
    history.push_back(std::move(candidates));
  }

  if (history.empty()) {
    prompt_ = reshape(cma_.mean, config_.prompts, d);
    return;
  }
  const Candidate best = cma_best(history);
  report.best_fitness = best.fitness;
  prompt_ = reshape(best.genome, config_.prompts, d);
}

TaskReport Engine::learn_task(TaskStream& stream, std::size_t t) {
  const auto started = std::chrono::steady_clock::now();
  TaskReport report;
  report.task = t;
  report.best_fitness = std::numeric_limits<double>::quiet_NaN();

  const Task& task = stream.task(t);
  const SampleSet& train = stream.train(t);
  if (train.size() == 0) throw Error(ErrorCode::kEmptyBatch, "task " + std::to_string(t) + " has no training data");

  if (searches()) search_prompt(train, task, report);

  std::optional<LayerStats> stats;
  Matrix raw;
  if (backbone_) {
    BatchFeatures forward = batch_forward(*backbone_, prompt_, train.inputs);
    raw = std::move(forward.features);
    stats = std::move(forward.stats);
  } else {
    raw = features(train.inputs);
  }
  const Matrix h = nrp_project(projection_, raw);

  classifier_.extend(task.class_ids);
  if (config_.mode == Mode::kFitnessOnly) {
    // Ridge on this task alone; earlier columns stay as they were.
    Kem local = kem_init(config_.nrp_dim, config_.gamma);
    local.absorb(h);
    Classifier head = classifier_init(config_.nrp_dim);
    head.extend(task.class_ids);
    head.absorb(local.r, h, one_hot(train.labels, task.class_ids));
    const std::size_t first = classifier_.class_count() - task.class_ids.size();
    for (std::size_t r = 0; r < classifier_.dim(); ++r)
      for (std::size_t c = 0; c < task.class_ids.size(); ++c) classifier_.w(r, first + c) = head.w(r, c);
  } else {
    // R first, then W with the updated R.
    kem_.absorb(h);
    classifier_.absorb(kem_.r, h, one_hot(train.labels, classifier_.class_ids));
  }

  if (searches() && stats) history_ = update_history(history_, *stats);

  stream.retire(t);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

std::vector<Fraction> Engine::evaluate_all(const TaskStream& stream, std::size_t j) const {
  std::vector<Fraction> row;
  row.reserve(j + 1);
  for (std::size_t t = 0; t <= j; ++t) {
    const SampleSet& test = stream.test(t);
    if (test.size() == 0) throw Error(ErrorCode::kEmptyTestset, "task " + std::to_string(t));
    const Prediction p = predict(classifier_, encode(test.inputs));
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) hits += p.labels[i] == test.labels[i] ? 1 : 0;
    row.emplace_back(hits, static_cast<std::int64_t>(test.size()));
  }
  return row;
}

}  // namespace foro
