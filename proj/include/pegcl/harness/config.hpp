#pragma once

// Experiment configuration. Files are JSON; a file only needs the keys it
// changes, everything else keeps its default. Unknown keys are rejected.

#include "pegcl/compliance_controller.hpp"
#include "pegcl/curriculum.hpp"
#include "pegcl/reward_shaping.hpp"
#include "pegcl/rl/replay_buffer.hpp"
#include "pegcl/rl/sac.hpp"
#include "pegcl/sim_world.hpp"

#include <json.hpp>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pegcl::harness {

using nlohmann::json;

enum class Method {
  NoCurriculum,
  LinearUDR,
  LinearGDR,
  AdaptiveUDR,
  AdaptiveGDR,
  AdaptiveUDR_DyRe,
  AdaptiveGDR_DyRe,
};

inline constexpr Method kAllMethods[] = {Method::NoCurriculum,     Method::LinearUDR,  Method::LinearGDR,
                                         Method::AdaptiveUDR,      Method::AdaptiveGDR, Method::AdaptiveUDR_DyRe,
                                         Method::AdaptiveGDR_DyRe};

inline std::string method_name(Method m) {
  switch (m) {
    case Method::NoCurriculum: return "NoCurriculum";
    case Method::LinearUDR: return "LinearUDR";
    case Method::LinearGDR: return "LinearGDR";
    case Method::AdaptiveUDR: return "AdaptiveUDR";
    case Method::AdaptiveGDR: return "AdaptiveGDR";
    case Method::AdaptiveUDR_DyRe: return "AdaptiveUDR_DyRe";
    case Method::AdaptiveGDR_DyRe: return "AdaptiveGDR_DyRe";
  }
  return "?";
}

namespace detail {
inline std::string fold(std::string_view s) {
  std::string out;
  for (char c : s)
    if (c != '_' && c != '-') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}
}  // namespace detail

/// Case-insensitive; underscores and dashes are ignored.
inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (detail::fold(method_name(m)) == detail::fold(s)) return m;
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

inline bool is_dynamic_reward(Method m) { return m == Method::AdaptiveUDR_DyRe || m == Method::AdaptiveGDR_DyRe; }
inline bool is_adaptive(Method m) {
  return m == Method::AdaptiveUDR || m == Method::AdaptiveGDR || m == Method::AdaptiveUDR_DyRe ||
         m == Method::AdaptiveGDR_DyRe;
}
inline bool is_linear(Method m) { return m == Method::LinearUDR || m == Method::LinearGDR; }
inline curriculum::Strategy method_strategy(Method m) {
  return (m == Method::LinearGDR || m == Method::AdaptiveGDR || m == Method::AdaptiveGDR_DyRe)
             ? curriculum::Strategy::Gaussian
             : curriculum::Strategy::Uniform;
}

struct CurriculumConfig {
  double initial_level = 0.1;
  double level_step = 0.05;
  int threshold_up = 4;
  int threshold_down = -4;
  long linear_episode_max = 500;
  double gdr_sigma = 0.1;
  bool shared_difficulty = false;
  bool literal_range = false;
  int recent_window = 10;  // episodes in the logged recent success rate
};

struct AgentConfig {
  rl::SacHyperParams sac;
  int window = 4;
  rl::ReplayOptions replay;
  long warmup_steps = 1000;
  int updates_per_step = 1;
};

struct ControllerConfig {
  control::ActionBounds bounds;
  bool pid_scheduling = true;
  control::SchedulingParams scheduling;
  double integral_limit = control::kDefaultIntegralLimit;
  Vec6 displacement_limit = control::LoopSettings{}.displacement_limit;
};

struct EvalConfig {
  int trials = 100;
  std::vector<std::string> shapes = {"trapezoid", "star"};
  double time_limit = 50.0;  // s
  double level = 1.0;
};

struct ExperimentConfig {
  Method method = Method::AdaptiveGDR_DyRe;
  long total_steps = 30000;
  int episode_step_limit = 1000;
  double outer_dt = 0.05;
  int inner_substeps = 25;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  long checkpoint_every = 2000;

  reward::RewardWeights reward;
  Vec3 goal_force = Vec3::Zero();  // F_g, N
  sim::TerminationLimits termination;
  sim::NormalizationConstants normalization;
  sim::WorldConfig world;

  CurriculumConfig curriculum;
  std::vector<curriculum::ParamSpec> registry = curriculum::default_registry();
  AgentConfig agent;
  ControllerConfig controller;
  EvalConfig eval;

  double inner_dt() const { return outer_dt / inner_substeps; }
  int observation_size() const { return agent.window * sim::RawObservation::kSize; }

  void validate() const {
    if (total_steps < 1) throw std::invalid_argument("total_steps must be positive");
    if (episode_step_limit < 1) throw std::invalid_argument("episode_step_limit must be positive");
    if (!(outer_dt > 0.0)) throw std::invalid_argument("outer_dt must be positive");
    if (inner_substeps < 1) throw std::invalid_argument("inner_substeps must be positive");
    if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be positive");
    if (agent.window < 1) throw std::invalid_argument("agent.window must be positive");
    if (agent.warmup_steps < 0) throw std::invalid_argument("agent.warmup_steps must be non-negative");
    if (agent.updates_per_step < 0) throw std::invalid_argument("agent.updates_per_step must be non-negative");
    if (agent.replay.capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    if (eval.trials < 1) throw std::invalid_argument("eval.trials must be positive");
    if (!(eval.time_limit > 0.0)) throw std::invalid_argument("eval.time_limit must be positive");
    curriculum::require_level(eval.level);
    for (const auto& s : eval.shapes) (void)parse_shape(s);
    if (curriculum.linear_episode_max < 1) throw std::invalid_argument("linear_episode_max must be positive");
    if (!(curriculum.gdr_sigma > 0.0)) throw std::invalid_argument("gdr_sigma must be positive");
    if (curriculum.recent_window < 1) throw std::invalid_argument("recent_window must be positive");
    curriculum::CurriculumState{curriculum.initial_level, 0, curriculum.level_step, curriculum.threshold_up,
                                curriculum.threshold_down}
        .validate();
    reward.validate();
    agent.sac.validate();
    for (const auto& s : registry) s.validate();
    for (const char* name : {curriculum::kPositionOffset, curriculum::kOrientationOffset, curriculum::kPegShape,
                             curriculum::kClearance, curriculum::kEpsilon, curriculum::kFriction,
                             curriculum::kStiffness})
      (void)curriculum::find_spec(registry, name);
    for (const auto& c : curriculum::find_spec(registry, curriculum::kPegShape).choices) (void)parse_shape(c);
  }

  curriculum::SamplingOptions sampling() const {
    curriculum::SamplingOptions o;
    o.sigma = curriculum.gdr_sigma;
    o.shared_difficulty = curriculum.shared_difficulty;
    o.range_form = curriculum.literal_range ? curriculum::RangeForm::Literal : curriculum::RangeForm::Interpolated;
    return o;
  }

  control::LoopSettings loop_settings() const {
    control::LoopSettings s;
    s.dt = inner_dt();
    s.pid_scheduling = controller.pid_scheduling;
    s.scheduling = controller.scheduling;
    s.integral_limit = controller.integral_limit;
    s.displacement_limit = controller.displacement_limit;
    s.goal_wrench << goal_force, Vec3::Zero();
    return s;
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline json vec_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != N) throw std::invalid_argument(std::string(what) + " needs " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j.at(std::size_t(i)).get<double>();
  return v;
}

inline json spec_to_json(const curriculum::ParamSpec& s) {
  json j = {{"name", s.name}, {"unit", s.unit}};
  if (s.kind == curriculum::ParamKind::Discrete) {
    j["choices"] = s.choices;
  } else {
    j["easy"] = s.easy;
    j["hard"] = s.hard;
  }
  return j;
}

inline curriculum::ParamSpec spec_from_json(const json& j) {
  curriculum::ParamSpec s;
  s.name = j.at("name").get<std::string>();
  s.unit = j.value("unit", std::string{});
  if (j.contains("choices")) {
    s.kind = curriculum::ParamKind::Discrete;
    s.choices = j.at("choices").get<std::vector<std::string>>();
    s.easy = s.hard = 0.0;
  } else {
    s.easy = j.at("easy").get<double>();
    s.hard = j.at("hard").get<double>();
  }
  return s;
}

/// Every key of `patch` must exist in `reference` (objects only; arrays and
/// values are replaced wholesale).
inline void check_keys(const json& patch, const json& reference, const std::string& path) {
  if (!patch.is_object() || !reference.is_object()) return;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!reference.contains(it.key())) throw std::invalid_argument("unknown config key '" + key + "'");
    check_keys(it.value(), reference.at(it.key()), key);
  }
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  using detail::vec_to_json;
  const auto& b = c.controller.bounds;
  json registry = json::array();
  for (const auto& s : c.registry) registry.push_back(detail::spec_to_json(s));
  return {
      {"method", method_name(c.method)},
      {"total_steps", c.total_steps},
      {"episode_step_limit", c.episode_step_limit},
      {"outer_dt", c.outer_dt},
      {"inner_substeps", c.inner_substeps},
      {"seeds", c.seeds},
      {"checkpoint_every", c.checkpoint_every},
      {"reward", {{"w1", c.reward.position_velocity}, {"w2", c.reward.force}, {"w3", c.reward.event}}},
      {"goal_force", vec_to_json(c.goal_force)},
      {"termination",
       {{"force_limit", c.termination.force_limit},
        {"min_cumulative_reward", c.termination.min_cumulative_reward},
        {"success_distance", c.termination.success_distance}}},
      {"normalization",
       {{"position", c.normalization.position},
        {"orientation", c.normalization.orientation},
        {"linear_velocity", c.normalization.linear_velocity},
        {"angular_velocity", c.normalization.angular_velocity},
        {"force", c.normalization.force},
        {"torque", c.normalization.torque}}},
      {"world",
       {{"peg_radius", c.world.peg_radius},
        {"peg_length", c.world.peg_length},
        {"hole_depth", c.world.hole_depth},
        {"chamfer", c.world.chamfer},
        {"side_row_spacing", c.world.side_row_spacing},
        {"sensor_noise_std", c.world.sensor_noise_std},
        {"max_linear_speed", c.world.limits.max_linear_speed},
        {"max_angular_speed", c.world.limits.max_angular_speed}}},
      {"curriculum",
       {{"initial_level", c.curriculum.initial_level},
        {"level_step", c.curriculum.level_step},
        {"threshold_up", c.curriculum.threshold_up},
        {"threshold_down", c.curriculum.threshold_down},
        {"linear_episode_max", c.curriculum.linear_episode_max},
        {"gdr_sigma", c.curriculum.gdr_sigma},
        {"shared_difficulty", c.curriculum.shared_difficulty},
        {"literal_range", c.curriculum.literal_range},
        {"recent_window", c.curriculum.recent_window}}},
      {"registry", registry},
      {"agent",
       {{"gamma", c.agent.sac.gamma},
        {"tau", c.agent.sac.tau},
        {"batch_size", c.agent.sac.batch_size},
        {"actor_lr", c.agent.sac.actor_lr},
        {"critic_lr", c.agent.sac.critic_lr},
        {"alpha_lr", c.agent.sac.alpha_lr},
        {"target_entropy", c.agent.sac.target_entropy},
        {"initial_alpha", c.agent.sac.initial_alpha},
        {"hidden", c.agent.sac.hidden},
        {"log_std_min", c.agent.sac.log_std_min},
        {"log_std_max", c.agent.sac.log_std_max},
        {"window", c.agent.window},
        {"replay_capacity", c.agent.replay.capacity},
        {"prioritized_replay", c.agent.replay.prioritized},
        {"priority_eps", c.agent.replay.priority_eps},
        {"priority_alpha", c.agent.replay.priority_alpha},
        {"importance_beta", c.agent.replay.importance_beta},
        {"warmup_steps", c.agent.warmup_steps},
        {"updates_per_step", c.agent.updates_per_step}}},
      {"controller",
       {{"kpx_lo", vec_to_json(b.kpx_lo)},
        {"kpx_hi", vec_to_json(b.kpx_hi)},
        {"kpf_lo", vec_to_json(b.kpf_lo)},
        {"kpf_hi", vec_to_json(b.kpf_hi)},
        {"ax_max", vec_to_json(b.ax_max)},
        {"derivative_ratio", b.derivative_ratio},
        {"integral_ratio", b.integral_ratio},
        {"pid_scheduling", c.controller.pid_scheduling},
        {"scheduling_threshold", c.controller.scheduling.threshold},
        {"scheduling_max_multiplier", c.controller.scheduling.max_multiplier},
        {"integral_limit", c.controller.integral_limit},
        {"displacement_limit", vec_to_json(c.controller.displacement_limit)}}},
      {"eval",
       {{"trials", c.eval.trials}, {"shapes", c.eval.shapes}, {"time_limit", c.eval.time_limit}, {"level", c.eval.level}}},
  };
}

inline ExperimentConfig config_from_json(const json& j) {
  using detail::vec_from;
  ExperimentConfig c;
  c.method = parse_method(j.at("method").get<std::string>());
  c.total_steps = j.at("total_steps").get<long>();
  c.episode_step_limit = j.at("episode_step_limit").get<int>();
  c.outer_dt = j.at("outer_dt").get<double>();
  c.inner_substeps = j.at("inner_substeps").get<int>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.checkpoint_every = j.at("checkpoint_every").get<long>();

  const json& r = j.at("reward");
  c.reward = {r.at("w1").get<double>(), r.at("w2").get<double>(), r.at("w3").get<double>()};
  c.goal_force = vec_from<3>(j.at("goal_force"), "goal_force");

  const json& t = j.at("termination");
  c.termination.force_limit = t.at("force_limit").get<double>();
  c.termination.min_cumulative_reward = t.at("min_cumulative_reward").get<double>();
  c.termination.success_distance = t.at("success_distance").get<double>();
  c.termination.max_steps = c.episode_step_limit;

  const json& n = j.at("normalization");
  c.normalization.position = n.at("position").get<double>();
  c.normalization.orientation = n.at("orientation").get<double>();
  c.normalization.linear_velocity = n.at("linear_velocity").get<double>();
  c.normalization.angular_velocity = n.at("angular_velocity").get<double>();
  c.normalization.force = n.at("force").get<double>();
  c.normalization.torque = n.at("torque").get<double>();

  const json& w = j.at("world");
  c.world.peg_radius = w.at("peg_radius").get<double>();
  c.world.peg_length = w.at("peg_length").get<double>();
  c.world.hole_depth = w.at("hole_depth").get<double>();
  c.world.chamfer = w.at("chamfer").get<double>();
  c.world.side_row_spacing = w.at("side_row_spacing").get<double>();
  c.world.sensor_noise_std = w.at("sensor_noise_std").get<double>();
  c.world.limits.max_linear_speed = w.at("max_linear_speed").get<double>();
  c.world.limits.max_angular_speed = w.at("max_angular_speed").get<double>();

  const json& cu = j.at("curriculum");
  c.curriculum.initial_level = cu.at("initial_level").get<double>();
  c.curriculum.level_step = cu.at("level_step").get<double>();
  c.curriculum.threshold_up = cu.at("threshold_up").get<int>();
  c.curriculum.threshold_down = cu.at("threshold_down").get<int>();
  c.curriculum.linear_episode_max = cu.at("linear_episode_max").get<long>();
  c.curriculum.gdr_sigma = cu.at("gdr_sigma").get<double>();
  c.curriculum.shared_difficulty = cu.at("shared_difficulty").get<bool>();
  c.curriculum.literal_range = cu.at("literal_range").get<bool>();
  c.curriculum.recent_window = cu.at("recent_window").get<int>();

  c.registry.clear();
  for (const auto& s : j.at("registry")) c.registry.push_back(detail::spec_from_json(s));

  const json& a = j.at("agent");
  c.agent.sac.gamma = a.at("gamma").get<double>();
  c.agent.sac.tau = a.at("tau").get<double>();
  c.agent.sac.batch_size = a.at("batch_size").get<int>();
  c.agent.sac.actor_lr = a.at("actor_lr").get<double>();
  c.agent.sac.critic_lr = a.at("critic_lr").get<double>();
  c.agent.sac.alpha_lr = a.at("alpha_lr").get<double>();
  c.agent.sac.target_entropy = a.at("target_entropy").get<double>();
  c.agent.sac.initial_alpha = a.at("initial_alpha").get<double>();
  c.agent.sac.hidden = a.at("hidden").get<std::vector<int>>();
  c.agent.sac.log_std_min = a.at("log_std_min").get<double>();
  c.agent.sac.log_std_max = a.at("log_std_max").get<double>();
  c.agent.window = a.at("window").get<int>();
  c.agent.replay.capacity = a.at("replay_capacity").get<std::size_t>();
  c.agent.replay.prioritized = a.at("prioritized_replay").get<bool>();
  c.agent.replay.priority_eps = a.at("priority_eps").get<double>();
  c.agent.replay.priority_alpha = a.at("priority_alpha").get<double>();
  c.agent.replay.importance_beta = a.at("importance_beta").get<double>();
  c.agent.warmup_steps = a.at("warmup_steps").get<long>();
  c.agent.updates_per_step = a.at("updates_per_step").get<int>();

  const json& k = j.at("controller");
  auto& b = c.controller.bounds;
  b.kpx_lo = vec_from<6>(k.at("kpx_lo"), "controller.kpx_lo");
  b.kpx_hi = vec_from<6>(k.at("kpx_hi"), "controller.kpx_hi");
  b.kpf_lo = vec_from<6>(k.at("kpf_lo"), "controller.kpf_lo");
  b.kpf_hi = vec_from<6>(k.at("kpf_hi"), "controller.kpf_hi");
  b.ax_max = vec_from<6>(k.at("ax_max"), "controller.ax_max");
  b.derivative_ratio = k.at("derivative_ratio").get<double>();
  b.integral_ratio = k.at("integral_ratio").get<double>();
  c.controller.pid_scheduling = k.at("pid_scheduling").get<bool>();
  c.controller.scheduling.threshold = k.at("scheduling_threshold").get<double>();
  c.controller.scheduling.max_multiplier = k.at("scheduling_max_multiplier").get<double>();
  c.controller.integral_limit = k.at("integral_limit").get<double>();
  c.controller.displacement_limit = vec_from<6>(k.at("displacement_limit"), "controller.displacement_limit");

  const json& e = j.at("eval");
  c.eval.trials = e.at("trials").get<int>();
  c.eval.shapes = e.at("shapes").get<std::vector<std::string>>();
  c.eval.time_limit = e.at("time_limit").get<double>();
  c.eval.level = e.at("level").get<double>();

  c.validate();
  return c;
}

/// Applies `patch` over the defaults (JSON merge patch) and parses the result.
inline ExperimentConfig config_from_patch(const json& patch) {
  if (!patch.is_object()) throw std::invalid_argument("config must be a JSON object");
  json merged = to_json(ExperimentConfig{});
  detail::check_keys(patch, merged, "");
  merged.merge_patch(patch);
  return config_from_json(merged);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_patch(j);
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace pegcl::harness
