// foro: run experiments, check the oracle suite, inspect checkpoints.
//
//   foro run --config desk_kem.json [--seed N] [--mode foro|kem-only|fitness-only] [--out DIR]
//   foro verify [--fast] [--gamma X]
//   foro inspect checkpoint.ckpt
//
// Exit status: 0 success, 1 runtime failure, 2 invalid configuration.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "foro/config.hpp"
#include "foro/error.hpp"
#include "foro/experiment.hpp"
#include "foro/io.hpp"
#include "foro/verify.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

int report_config_error(const std::exception& e) {
  std::cerr << "config-invalid: " << e.what() << '\n';
  return kExitConfig;
}

int report_runtime_error(const std::exception& e) {
  if (const auto* fe = dynamic_cast<const foro::Error*>(&e)) {
    std::cerr << "runtime-failure [" << foro::module_of(fe->code()) << "]: " << e.what() << '\n';
  } else {
    std::cerr << "runtime-failure: " << e.what() << '\n';
  }
  return kExitRuntime;
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> out;
};

int cmd_run(const RunArgs& args) {
  foro::ExperimentConfig config;
  try {
    config = foro::load_config(args.config);
    if (args.seed) config.apply_seed(*args.seed);
    if (args.mode) config.mode = foro::parse_mode(*args.mode);
    if (args.out) config.output_dir = *args.out;
    config.validate();
  } catch (const std::exception& e) {
    return report_config_error(e);
  }
  try {
    const std::size_t threads = foro::default_thread_count();
    const foro::ExperimentResult result = foro::run_experiment(config, threads);
    foro::write_artifacts(result, config.output_dir);
    std::printf("tasks %zu  average accuracy %s  average forgetting %s  -> %s\n", result.accuracy.rows(),
                foro::format_double(result.average_accuracy).c_str(),
                foro::format_double(result.average_forgetting).c_str(), config.output_dir.string().c_str());
  } catch (const std::exception& e) {
    return report_runtime_error(e);
  }
  return 0;
}

int cmd_verify(bool fast, std::optional<double> gamma) {
  std::vector<foro::CheckResult> results;
  try {
    results = foro::run_verify(foro::VerifyOptions{fast, gamma});
  } catch (const foro::Error& e) {
    if (e.code() == foro::ErrorCode::kInvalidConfig) return report_config_error(e);
    return report_runtime_error(e);
  }
  bool ok = true;
  for (const foro::CheckResult& r : results) {
    std::printf("%s  %-60s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    ok = ok && r.passed;
  }
  return ok ? 0 : kExitRuntime;
}

int cmd_inspect(const std::string& path) {
  try {
    const foro::Checkpoint ckpt = foro::read_checkpoint(path);
    const foro::Classifier& clf = ckpt.classifier;
    std::printf("M             %zu\n", ckpt.kem.dim());
    std::printf("classes       %zu\n", clf.class_count());
    std::printf("class_ids     ");
    for (std::size_t i = 0; i < clf.class_ids.size(); ++i) std::printf(i ? " %u" : "%u", clf.class_ids[i]);
    std::printf("\n");
    std::printf("gamma         %s\n", foro::format_double(ckpt.kem.gamma).c_str());
    std::printf("samples_seen  %llu\n", static_cast<unsigned long long>(ckpt.kem.samples_seen));
    std::printf("cond(R)       %.6g\n", foro::spd_condition_estimate(ckpt.kem.r));
    std::printf("W column norms\n");
    for (std::size_t c = 0; c < clf.class_count(); ++c) {
      double sq = 0.0;
      for (std::size_t r = 0; r < clf.dim(); ++r) sq += clf.w(r, c) * clf.w(r, c);
      std::printf("  %u  %.6g\n", clf.class_ids[c], std::sqrt(sq));
    }
  } catch (const std::exception& e) {
    return report_runtime_error(e);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward-only continual learning engine"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Learn a task stream and write metrics, curves and a checkpoint");
  run->add_option("--config", run_args.config, "Experiment config (JSON)")->required();
  run->add_option("--seed", run_args.seed, "Master seed override");
  run->add_option("--mode", run_args.mode, "foro | kem-only | fitness-only");
  run->add_option("--out", run_args.out, "Output directory override");

  bool fast = false;
  std::optional<double> gamma;
  CLI::App* verify = app.add_subcommand("verify", "Run the built-in oracle checks");
  verify->add_flag("--fast", fast, "Fewer equivalence streams, skip Rosenbrock");
  verify->add_option("--gamma", gamma, "Ridge gamma for the equivalence streams");

  std::string ckpt;
  CLI::App* inspect = app.add_subcommand("inspect", "Summarize a checkpoint");
  inspect->add_option("checkpoint", ckpt, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) return cmd_run(run_args);
  if (*verify) return cmd_verify(fast, gamma);
  return cmd_inspect(ckpt);
}
