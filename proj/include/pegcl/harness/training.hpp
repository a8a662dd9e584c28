#pragma once

#include "pegcl/harness/artifacts.hpp"
#include "pegcl/harness/csv.hpp"
#include "pegcl/harness/episode.hpp"

#include <deque>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace pegcl::harness {

struct EpisodeLog {
  long episode = 0;
  long step = 0;  // total outer steps after this episode
  double level = 0.0;
  int perf = 0;   // adaptive counter after the update
  double recent_success = 0.0;
  EpisodeResult result;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  bool write_checkpoints = true;
  long loss_log_every = 100;    // updates per losses.csv row
  std::ostream* progress = nullptr;
  long progress_every = 50;     // episodes
};

struct TrainResult {
  std::vector<EpisodeLog> episodes;
  Agent agent;
  double final_level = 0.0;
  long total_steps = 0;
  std::filesystem::path final_checkpoint;
};

inline std::vector<std::string> episode_csv_header() {
  return {"episode", "step", "level", "perf", "recent_success", "outcome", "steps",
          "return", "scaled_return", "duration", "shape"};
}

inline std::vector<std::string> episode_csv_row(const EpisodeLog& e) {
  return {std::to_string(e.episode),
          std::to_string(e.step),
          fmt_num(e.level),
          std::to_string(e.perf),
          fmt_num(e.recent_success),
          std::string(sim::status_name(e.result.outcome)),
          std::to_string(e.result.steps),
          fmt_num(e.result.cumulative_reward),
          fmt_num(e.result.scaled_return),
          fmt_num(e.result.wall_time),
          std::string(shape_name(e.result.domain.shape))};
}

/// Level for the next episode before sampling the domain.
inline double episode_level(const ExperimentConfig& cfg, long episode, const curriculum::CurriculumState& cs) {
  if (cfg.method == Method::NoCurriculum) return 1.0;
  if (is_linear(cfg.method)) return curriculum::linear_level(episode, cfg.curriculum.linear_episode_max);
  return cs.level;
}

/// Runs episodes until at least cfg.total_steps outer steps have been taken
/// (the episode in flight is finished). Writes config.json, episodes.csv,
/// losses.csv and checkpoints/ under opts.out_dir.
inline TrainResult train(const ExperimentConfig& cfg, std::uint64_t seed, const TrainOptions& opts) {
  cfg.validate();
  namespace fs = std::filesystem;
  if (opts.out_dir.empty()) throw std::invalid_argument("training needs an output directory");
  fs::create_directories(opts.out_dir);
  const fs::path ckpt_dir = opts.out_dir / "checkpoints";

  json resolved = to_json(cfg);
  resolved["seed"] = seed;
  write_json(opts.out_dir / "config.json", resolved);

  CsvWriter episodes_csv(opts.out_dir / "episodes.csv", episode_csv_header());
  CsvWriter losses_csv(opts.out_dir / "losses.csv", {"update", "step", "critic1", "critic2", "actor", "alpha_loss",
                                                      "alpha", "mean_q", "mean_log_prob"});

  Rng env_rng(derive_seed(seed, 1));
  Rng update_rng(derive_seed(seed, 3));
  Rng action_rng(derive_seed(seed, 4));

  TrainResult out;
  out.agent = make_agent(cfg, seed);
  Agent& agent = out.agent;
  rl::ReplayBuffer<float> buffer(cfg.observation_size(), control::kActionDim, cfg.agent.replay);

  curriculum::CurriculumState cs{cfg.curriculum.initial_level, 0, cfg.curriculum.level_step,
                                 cfg.curriculum.threshold_up, cfg.curriculum.threshold_down};
  const curriculum::Strategy strategy = method_strategy(cfg.method);
  const curriculum::SamplingOptions sampling = cfg.sampling();
  const bool dyre = is_dynamic_reward(cfg.method);

  long step = 0;
  long episode = 0;
  double level = 0.0;
  std::deque<bool> recent;
  rl::SacLosses loss_sum;
  long loss_count = 0;

  auto flush_losses = [&]() {
    if (loss_count == 0) return;
    const double k = static_cast<double>(loss_count);
    losses_csv.row({std::to_string(agent.update_count()), std::to_string(step), fmt_num(loss_sum.critic1 / k),
                    fmt_num(loss_sum.critic2 / k), fmt_num(loss_sum.actor / k), fmt_num(loss_sum.alpha_loss / k),
                    fmt_num(loss_sum.alpha / k), fmt_num(loss_sum.mean_q / k), fmt_num(loss_sum.mean_log_prob / k)});
    loss_sum = {};
    loss_count = 0;
  };

  const Policy policy = [&](const Eigen::VectorXd& obs) -> control::Action {
    control::Action a;
    if (step < cfg.agent.warmup_steps) {
      for (int j = 0; j < control::kActionDim; ++j) a[j] = uniform(action_rng, -1.0, 1.0);
      return a;
    }
    const auto s = agent.act(obs.cast<float>(), action_rng, false);
    return s.action.cast<double>();
  };

  const StepCallback on_step = [&](const StepRecord& r) {
    buffer.push(r.obs, r.action, r.reward, r.next_obs, r.done);
    ++step;
    if (step > cfg.agent.warmup_steps && buffer.size() >= std::size_t(cfg.agent.sac.batch_size)) {
      for (int u = 0; u < cfg.agent.updates_per_step; ++u) {
        const rl::Batch<float> batch = buffer.sample(std::size_t(cfg.agent.sac.batch_size), update_rng);
        const auto g = agent.update(batch, update_rng);
        buffer.update_priorities(batch.indices, g.td_errors);
        loss_sum.critic1 += g.losses.critic1;
        loss_sum.critic2 += g.losses.critic2;
        loss_sum.actor += g.losses.actor;
        loss_sum.alpha_loss += g.losses.alpha_loss;
        loss_sum.alpha += g.losses.alpha;
        loss_sum.mean_q += g.losses.mean_q;
        loss_sum.mean_log_prob += g.losses.mean_log_prob;
        if (++loss_count >= opts.loss_log_every) flush_losses();
      }
    }
    if (opts.write_checkpoints && step % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%07ld", step);
      save_checkpoint(ckpt_dir, name, agent, cfg, {step, episode, level, seed});
    }
  };

  while (step < cfg.total_steps) {
    level = episode_level(cfg, episode, cs);
    DomainParams domain = curriculum::sample_domain(cfg.registry, level, strategy, env_rng, sampling);
    const sim::WorldState world = sim::make_task(domain, env_rng(), cfg.world);

    EpisodeOptions eo;
    eo.step_limit = cfg.episode_step_limit;
    eo.dynamic_reward = dyre;
    eo.reward_level = level;
    EpisodeResult res = run_episode(cfg, world, policy, eo, on_step);
    res.domain = domain;
    res.level_at_sample = level;

    const bool success = res.outcome == sim::Status::Success;
    if (is_adaptive(cfg.method)) cs = curriculum::adaptive_update(cs, success);
    recent.push_back(success);
    if (recent.size() > std::size_t(cfg.curriculum.recent_window)) recent.pop_front();
    double rate = 0.0;
    for (bool b : recent) rate += b ? 1.0 : 0.0;

    EpisodeLog log{episode, step, level, cs.perf, rate / static_cast<double>(recent.size()), res};
    episodes_csv.row(episode_csv_row(log));
    out.episodes.push_back(log);
    if (opts.progress && (episode + 1) % opts.progress_every == 0) {
      *opts.progress << "episode " << episode + 1 << " step " << step << " level " << fmt_num(level)
                     << " recent_success " << fmt_num(log.recent_success) << '\n';
    }
    ++episode;
  }
  flush_losses();
  episodes_csv.flush();
  losses_csv.flush();

  out.final_level = is_adaptive(cfg.method) ? cs.level : episode_level(cfg, episode, cs);
  out.total_steps = step;
  out.final_checkpoint = save_checkpoint(ckpt_dir, "final", agent, cfg, {step, episode, out.final_level, seed});
  return out;
}

}  // namespace pegcl::harness
