#include "foro/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string_view>

#include "foro/error.hpp"
#include "foro/rng.hpp"

namespace foro {
namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); }

void reject_unknown(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) invalid(std::string(where) + " must be an object");
  const std::set<std::string_view> known(allowed);
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) invalid("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    const json& v = obj.at(key);
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) invalid(std::string(key) + " must be a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) invalid(std::string(key) + " must be a number");
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    invalid(std::string(key) + ": " + e.what());
  }
}

std::string read_string(const json& obj, const char* key, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) invalid(std::string(key) + " must be a string");
  return obj.at(key).get<std::string>();
}

SyntheticKind parse_kind(std::string_view s) {
  if (s == "patches") return SyntheticKind::kPatches;
  if (s == "features") return SyntheticKind::kFeatures;
  if (s == "xor") return SyntheticKind::kXor;
  invalid("unknown synthetic kind '" + std::string(s) + "'");
}

std::string_view kind_name(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::kPatches: return "patches";
    case SyntheticKind::kFeatures: return "features";
    case SyntheticKind::kXor: return "xor";
  }
  return "features";
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  reject_unknown(doc, "config",
                 {"mode", "seed", "prompts", "backbone", "cma", "fitness", "encoding", "stream", "output_dir"});
  ExperimentConfig c;
  c.mode = parse_mode(read_string(doc, "mode", "foro"));
  read(doc, "seed", c.seed);
  read(doc, "prompts", c.prompts);

  if (doc.contains("backbone")) {
    const json& b = doc.at("backbone");
    reject_unknown(b, "backbone", {"layers", "embed_dim", "patches", "heads", "mlp_ratio"});
    read(b, "layers", c.backbone.layers);
    read(b, "embed_dim", c.backbone.embed_dim);
    read(b, "patches", c.backbone.patches);
    read(b, "heads", c.backbone.heads);
    read(b, "mlp_ratio", c.backbone.mlp_ratio);
  }
  if (doc.contains("cma")) {
    const json& m = doc.at("cma");
    reject_unknown(m, "cma", {"population", "generations", "covariance"});
    read(m, "population", c.population);
    read(m, "generations", c.generations);
    const std::string cov = read_string(m, "covariance", "full");
    if (cov == "full") {
      c.covariance = CovarianceMode::kFull;
    } else if (cov == "block-diagonal") {
      c.covariance = CovarianceMode::kBlockDiagonal;
    } else {
      invalid("unknown covariance mode '" + cov + "'");
    }
  }
  if (doc.contains("fitness")) {
    const json& f = doc.at("fitness");
    reject_unknown(f, "fitness", {"lambda", "alpha", "eval_batch", "scoring"});
    read(f, "lambda", c.lambda);
    read(f, "alpha", c.alpha);
    read(f, "eval_batch", c.eval_batch);
    c.scoring = parse_ridge_scoring(read_string(f, "scoring", std::string(to_string(c.scoring))));
  }
  if (doc.contains("encoding")) {
    const json& e = doc.at("encoding");
    reject_unknown(e, "encoding", {"nrp_dim", "gamma", "activation"});
    read(e, "nrp_dim", c.nrp_dim);
    read(e, "gamma", c.gamma);
    c.activation = parse_activation(read_string(e, "activation", "relu"));
  }
  if (!doc.contains("stream")) invalid("missing 'stream'");
  const json& s = doc.at("stream");
  reject_unknown(s, "stream", {"synthetic", "manifest"});
  if (s.contains("synthetic") == s.contains("manifest")) invalid("stream needs exactly one of synthetic, manifest");
  if (s.contains("manifest")) {
    std::filesystem::path p = read_string(s, "manifest", "");
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.manifest = p;
  } else {
    const json& y = s.at("synthetic");
    reject_unknown(y, "stream.synthetic",
                   {"kind", "tasks", "classes_per_task", "feature_dim", "separation", "cluster_std", "shift",
                    "train_per_class", "test_per_class"});
    SyntheticSpec spec;
    spec.kind = parse_kind(read_string(y, "kind", "features"));
    if (spec.kind == SyntheticKind::kXor) {
      spec.tasks = 1;
      spec.classes_per_task = 2;
      spec.feature_dim = 2;
    }
    read(y, "tasks", spec.tasks);
    read(y, "classes_per_task", spec.classes_per_task);
    if (spec.kind == SyntheticKind::kPatches && y.contains("feature_dim")) {
      invalid("patch streams take feature_dim from backbone.embed_dim");
    }
    read(y, "feature_dim", spec.feature_dim);
    read(y, "separation", spec.separation);
    read(y, "cluster_std", spec.cluster_std);
    read(y, "shift", spec.shift);
    read(y, "train_per_class", spec.train_per_class);
    read(y, "test_per_class", spec.test_per_class);
    c.synthetic = spec;
  }
  c.output_dir = read_string(doc, "output_dir", c.output_dir.string());
  if (c.synthetic && c.synthetic->kind == SyntheticKind::kPatches) {
    c.synthetic->feature_dim = c.backbone.embed_dim;
    c.synthetic->patches = c.backbone.patches;
  }
  c.apply_seed(c.seed);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    invalid(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void ExperimentConfig::validate() const {
  backbone.validate();
  if (!(gamma > 0.0) || !std::isfinite(gamma)) invalid("encoding.gamma must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) invalid("fitness.lambda must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) invalid("fitness.alpha must lie in [0, 1]");
  if (population < 2) invalid("cma.population must be >= 2");
  if (eval_batch < 1) invalid("fitness.eval_batch must be >= 1");
  if (nrp_dim < 1) invalid("encoding.nrp_dim must be >= 1");
  const bool patches = synthetic && synthetic->kind == SyntheticKind::kPatches;
  if (mode != Mode::kKemOnly && !patches) invalid(std::string(to_string(mode)) + " mode needs a patch stream");
  if (mode != Mode::kKemOnly && prompts < 1) invalid("prompt search needs prompts >= 1");
  if (manifest && !std::filesystem::exists(*manifest)) invalid("manifest not found: " + manifest->string());
  if (synthetic) {
    try {
      synthetic->validate();
    } catch (const Error& e) {
      invalid(e.what());
    }
  }
}

void ExperimentConfig::apply_seed(std::uint64_t master) {
  seed = master;
  backbone.seed = backbone_seed();
  if (synthetic) synthetic->seed = data_seed();
}

std::uint64_t ExperimentConfig::backbone_seed() const { return derive_seed(seed, seed_stream::kBackbone); }
std::uint64_t ExperimentConfig::data_seed() const { return derive_seed(seed, seed_stream::kData); }

EngineSeeds ExperimentConfig::engine_seeds() const {
  return EngineSeeds{derive_seed(seed, seed_stream::kProjection), derive_seed(seed, seed_stream::kCma),
                     derive_seed(seed, seed_stream::kMinibatch)};
}

EngineConfig ExperimentConfig::engine_config(std::size_t threads) const {
  EngineConfig e;
  e.mode = mode;
  e.prompts = prompts;
  e.population = population;
  e.covariance = covariance;
  e.fitness.lambda = lambda;
  e.fitness.generations = generations;
  e.fitness.eval_batch = eval_batch;
  e.fitness.scoring = scoring;
  e.alpha = alpha;
  e.nrp_dim = nrp_dim;
  e.gamma = gamma;
  e.activation = activation;
  e.threads = threads;
  return e;
}

json to_json(const ExperimentConfig& c) {
  json doc;
  doc["mode"] = to_string(c.mode);
  doc["seed"] = c.seed;
  doc["prompts"] = c.prompts;
  doc["backbone"] = {{"layers", c.backbone.layers},
                     {"embed_dim", c.backbone.embed_dim},
                     {"patches", c.backbone.patches},
                     {"heads", c.backbone.heads},
                     {"mlp_ratio", c.backbone.mlp_ratio}};
  doc["cma"] = {{"population", c.population},
                {"generations", c.generations},
                {"covariance", c.covariance == CovarianceMode::kFull ? "full" : "block-diagonal"}};
  doc["fitness"] = {{"lambda", c.lambda}, {"alpha", c.alpha}, {"eval_batch", c.eval_batch},
                    {"scoring", to_string(c.scoring)}};
  doc["encoding"] = {{"nrp_dim", c.nrp_dim}, {"gamma", c.gamma}, {"activation", to_string(c.activation)}};
  if (c.manifest) {
    doc["stream"] = {{"manifest", c.manifest->string()}};
  } else if (c.synthetic) {
    const SyntheticSpec& s = *c.synthetic;
    json syn = {{"kind", kind_name(s.kind)},
                {"tasks", s.tasks},
                {"classes_per_task", s.classes_per_task},
                {"separation", s.separation},
                {"cluster_std", s.cluster_std},
                {"shift", s.shift},
                {"train_per_class", s.train_per_class},
                {"test_per_class", s.test_per_class}};
    if (s.kind != SyntheticKind::kPatches) syn["feature_dim"] = s.feature_dim;
    doc["stream"] = {{"synthetic", syn}};
  }
  doc["output_dir"] = c.output_dir.string();
  return doc;
}

}  // namespace foro
