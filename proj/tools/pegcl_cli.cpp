// pegcl: train, evaluate and compare peg-insertion policies.

#include "pegcl/harness/evaluation.hpp"
#include "pegcl/harness/report.hpp"
#include "pegcl/harness/training.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pegcl;
using namespace pegcl::harness;

namespace {

int run_train(const std::string& config_path, const std::string& method, std::optional<std::uint64_t> seed,
              const std::string& out, const std::string& pid, std::optional<long> total_steps, bool quiet) {
  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
  if (!method.empty()) cfg.method = parse_method(method);
  if (!pid.empty()) cfg.controller.pid_scheduling = pid == "on";
  if (total_steps) cfg.total_steps = *total_steps;
  if (!seed && cfg.seeds.empty()) throw std::invalid_argument("no seed given and the config lists none");
  const std::uint64_t s = seed ? *seed : cfg.seeds.front();

  TrainOptions opts;
  opts.out_dir = out;
  if (!quiet) opts.progress = &std::cerr;
  const TrainResult r = train(cfg, s, opts);
  std::size_t successes = 0;
  for (const auto& e : r.episodes) successes += e.result.outcome == sim::Status::Success;
  std::cout << method_name(cfg.method) << " seed " << s << ": " << r.episodes.size() << " episodes, " << r.total_steps
            << " steps, " << successes << " successes, final level " << fmt_num(r.final_level) << "\n"
            << "checkpoint " << r.final_checkpoint.string() << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::vector<std::string>& shapes_in, std::optional<int> trials,
             std::uint64_t seed, const std::string& out) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const std::vector<std::string> shapes = shapes_in.empty() ? ck.config.eval.shapes : shapes_in;
  const int n = trials ? *trials : ck.config.eval.trials;
  // manifest lives in <run>/checkpoints/
  const fs::path run_dir = ck.manifest.parent_path().parent_path();
  const Policy policy = deterministic_policy(ck.agent);
  for (const auto& name : shapes) {
    const ShapeKind shape = parse_shape(name);
    const EvalSummary s = evaluate_policy(ck.config, policy, shape, n, seed);
    fs::path dir = out.empty() ? run_dir / ("eval_" + std::string(shape_name(shape))) : fs::path(out);
    if (!out.empty() && shapes.size() > 1) dir /= std::string(shape_name(shape));
    write_eval(dir, s);
    std::cout << shape_name(shape) << ": success " << s.successes << "/" << s.trials << " ("
              << fmt_num(s.success_rate) << "), avg time "
              << (s.avg_time ? fmt_num(*s.avg_time) + " s" : std::string("n/a")) << "  -> " << dir.string() << "\n";
  }
  return 0;
}

int run_report(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<fs::path> dirs(runs.begin(), runs.end());
  const Report rep = emit_report(dirs, out.empty() ? std::nullopt : std::optional<fs::path>(out));
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << rep.text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum domain-randomization training for compliant peg insertion"};
  app.require_subcommand(1);

  std::string config_path, method, out, pid;
  std::optional<std::uint64_t> seed;
  std::optional<long> total_steps;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "Train a policy");
  train_cmd->add_option("--config", config_path, "JSON config (keys override defaults)")->check(CLI::ExistingFile);
  train_cmd->add_option("--method", method, "Training method, e.g. AdaptiveGDR_DyRe");
  train_cmd->add_option("--seed", seed, "Run seed (default: first seed in the config)");
  train_cmd->add_option("--out", out, "Output directory")->required();
  train_cmd->add_option("--pid-scheduling", pid, "Position gain scheduling")->check(CLI::IsMember({"on", "off"}));
  train_cmd->add_option("--total-steps", total_steps, "Override the outer-step budget");
  train_cmd->add_flag("--quiet", quiet, "No progress output");

  std::string checkpoint, eval_out;
  std::vector<std::string> shapes;
  std::optional<int> trials;
  std::uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on held-out shapes");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint manifest or run directory")->required();
  eval_cmd->add_option("--shape", shapes, "Peg shape(s) (default: config eval shapes)");
  eval_cmd->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_seed, "Seed for initial conditions");
  eval_cmd->add_option("--out", eval_out, "Output directory (default: <run>/eval_<shape>)");

  std::vector<std::string> runs;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Compare completed runs");
  report_cmd->add_option("--runs", runs, "Run directories")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report_out, "Write learning_curves.csv, report.json and report.txt here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train_cmd) return run_train(config_path, method, seed, out, pid, total_steps, quiet);
    if (*eval_cmd) return run_eval(checkpoint, shapes, trials, eval_seed, eval_out);
    if (*report_cmd) return run_report(runs, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
