#pragma once

#include "pegcl/harness/config.hpp"
#include "pegcl/rl/observation_window.hpp"

#include <functional>
#include <stdexcept>
#include <string>

namespace pegcl::harness {

struct EpisodeResult {
  sim::Status outcome = sim::Status::Running;
  int steps = 0;
  double wall_time = 0.0;          // simulated seconds
  double cumulative_reward = 0.0;  // unscaled, drives the Stuck check
  double scaled_return = 0.0;      // what the learner saw (differs for DyRe)
  double level_at_sample = 0.0;
  DomainParams domain;
};

struct StepRecord {
  Eigen::VectorXd obs;
  control::Action action;
  double reward = 0.0;  // after level scaling, if any
  Eigen::VectorXd next_obs;
  bool done = false;    // Success or Collision only
  sim::Status status = sim::Status::Running;
};

using Policy = std::function<control::Action(const Eigen::VectorXd& obs)>;
using StepCallback = std::function<void(const StepRecord&)>;

struct EpisodeOptions {
  int step_limit = 1000;
  bool dynamic_reward = false;
  double reward_level = 1.0;  // L used by the dynamic reward
};

/// Normalized (x, v, f) magnitudes fed to the shaped reward.
struct RewardInputs {
  double x = 0.0;
  double v = 0.0;
  double f = 0.0;
};

inline RewardInputs reward_inputs(const sim::WorldState& w, const Vec3& goal_force,
                                  const sim::NormalizationConstants& n) {
  const Vec3 d = w.goal().position - w.peg_pose.position;
  return {std::min(1.0, d.norm() / n.position), std::min(1.0, w.linear_velocity.norm() / n.linear_velocity),
          std::min(1.0, (goal_force - w.sensed.force).norm() / n.force)};
}

inline reward::StepStatus step_status(sim::Status s) {
  if (s == sim::Status::Success) return reward::StepStatus::Completed;
  if (s == sim::Status::Collision) return reward::StepStatus::Collision;
  return reward::StepStatus::Otherwise;
}

inline bool world_finite(const sim::WorldState& w) {
  return w.peg_pose.position.allFinite() && w.peg_pose.orientation.allFinite() && w.linear_velocity.allFinite() &&
         w.angular_velocity.allFinite() && w.sensed.force.allFinite() && w.sensed.torque.allFinite();
}

/// Rolls out one episode. The controller runs at the inner rate with the
/// gains chosen at the start of each outer step; a force-limit violation at
/// any inner tick ends the outer step early.
inline EpisodeResult run_episode(const ExperimentConfig& cfg, sim::WorldState world, const Policy& policy,
                                 const EpisodeOptions& opts, const StepCallback& on_step = {}) {
  if (opts.step_limit < 1) throw std::invalid_argument("episode step limit must be positive");
  const sim::Pose goal = world.goal();
  const control::LoopSettings loop = cfg.loop_settings();
  sim::TerminationLimits limits = cfg.termination;
  limits.max_steps = opts.step_limit;

  rl::ObservationWindow window(cfg.agent.window, sim::RawObservation::kSize);
  window.reset(sim::observe(world, goal, cfg.normalization).flatten());
  control::ControllerState cstate;

  EpisodeResult res;
  StepRecord rec;
  rec.obs = window.flat();
  while (true) {
    rec.action = policy(rec.obs);
    const control::ControllerGains gains = control::map_action(rec.action, cfg.controller.bounds);
    for (int k = 0; k < cfg.inner_substeps; ++k) {
      world = control::control_tick(world, goal, gains, cstate, loop);
      if (world.sensed.force.norm() > limits.force_limit) break;
    }
    if (!world_finite(world))
      throw std::runtime_error("non-finite simulator state at step " + std::to_string(res.steps + 1));
    ++res.steps;

    // Event branch from the post-step state, then the full termination check.
    sim::Status event = sim::check_termination(world, limits, 0.0, 0);
    const RewardInputs ri = reward_inputs(world, cfg.goal_force, cfg.normalization);
    const double r = reward::reward_total(ri.x, ri.v, ri.f, step_status(event), cfg.reward);
    res.cumulative_reward += r;
    const double learned = opts.dynamic_reward ? reward::reward_dynamic(r, opts.reward_level) : r;
    res.scaled_return += learned;
    const sim::Status status = sim::check_termination(world, limits, res.cumulative_reward, res.steps);

    window.push(sim::observe(world, goal, cfg.normalization).flatten());
    rec.reward = learned;
    rec.next_obs = window.flat();
    rec.status = status;
    rec.done = status == sim::Status::Success || status == sim::Status::Collision;
    if (on_step) on_step(rec);
    if (status != sim::Status::Running) {
      res.outcome = status;
      break;
    }
    rec.obs = rec.next_obs;
  }
  res.wall_time = res.steps * cfg.outer_dt;
  return res;
}

}  // namespace pegcl::harness
