#pragma once

#include "pegcl/harness/artifacts.hpp"
#include "pegcl/harness/csv.hpp"
#include "pegcl/harness/episode.hpp"

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pegcl::harness {

struct TrialResult {
  int trial = 0;
  EpisodeResult result;
};

struct EvalSummary {
  std::string shape;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::optional<double> avg_time;  // successful trials only
  std::uint64_t seed = 0;
  std::vector<TrialResult> per_trial;
};

inline json to_json(const EvalSummary& s) {
  return {{"shape", s.shape},
          {"trials", s.trials},
          {"successes", s.successes},
          {"success_rate", s.success_rate},
          {"avg_time", s.avg_time ? json(*s.avg_time) : json(nullptr)},
          {"seed", s.seed}};
}

inline int eval_step_limit(const ExperimentConfig& cfg) {
  return std::max(1, static_cast<int>(std::lround(cfg.eval.time_limit / cfg.outer_dt)));
}

/// Runs `trials` episodes at the evaluation level with uniform sampling and
/// the peg shape overridden. Initial conditions depend on the seed only.
inline EvalSummary evaluate_policy(const ExperimentConfig& cfg, const Policy& policy, ShapeKind shape, int trials,
                                   std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be positive");
  Rng rng(derive_seed(seed, 11));
  EvalSummary s;
  s.shape = shape_name(shape);
  s.trials = trials;
  s.seed = seed;
  double time_sum = 0.0;
  EpisodeOptions eo;
  eo.step_limit = eval_step_limit(cfg);
  for (int t = 0; t < trials; ++t) {
    DomainParams domain =
        curriculum::sample_domain(cfg.registry, cfg.eval.level, curriculum::Strategy::Uniform, rng, cfg.sampling());
    domain.shape = shape;
    const sim::WorldState world = sim::make_task(domain, rng(), cfg.world);
    EpisodeResult r = run_episode(cfg, world, policy, eo);
    r.domain = domain;
    r.level_at_sample = cfg.eval.level;
    if (r.outcome == sim::Status::Success) {
      ++s.successes;
      time_sum += r.wall_time;
    }
    s.per_trial.push_back({t, r});
  }
  s.success_rate = static_cast<double>(s.successes) / trials;
  if (s.successes > 0) s.avg_time = time_sum / s.successes;
  return s;
}

inline Policy deterministic_policy(const Agent& agent) {
  return [&agent](const Eigen::VectorXd& obs) -> control::Action {
    Rng unused(0);
    return agent.act(obs.cast<float>(), unused, true).action.cast<double>();
  };
}

inline void write_eval(const std::filesystem::path& dir, const EvalSummary& s) {
  std::filesystem::create_directories(dir);
  CsvWriter csv(dir / "eval.csv", {"trial", "shape", "outcome", "steps", "time", "return"});
  for (const auto& t : s.per_trial)
    csv.row({std::to_string(t.trial), s.shape, std::string(sim::status_name(t.result.outcome)),
             std::to_string(t.result.steps), fmt_num(t.result.wall_time), fmt_num(t.result.cumulative_reward)});
  csv.flush();
  write_json(dir / "summary.json", to_json(s));
}

}  // namespace pegcl::harness
