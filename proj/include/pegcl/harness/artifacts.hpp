#pragma once

// Checkpoint = <name>.tensors (named-tensor file) + <name>.json (manifest).

#include "pegcl/harness/config.hpp"
#include "pegcl/rl/checkpoint.hpp"

#include <filesystem>
#include <string>

namespace pegcl::harness {

using Agent = rl::SacAgent<float>;

inline constexpr const char* kManifestFormat = "pegcl-checkpoint-1";

struct CheckpointInfo {
  long step = 0;
  long episode = 0;
  double level = 0.0;
  std::uint64_t seed = 0;
};

inline Agent make_agent(const ExperimentConfig& cfg, std::uint64_t seed) {
  return Agent(cfg.observation_size(), control::kActionDim, cfg.agent.sac, derive_seed(seed, 2));
}

/// Writes dir/<name>.tensors and dir/<name>.json; returns the manifest path.
inline std::filesystem::path save_checkpoint(const std::filesystem::path& dir, const std::string& name, Agent& agent,
                                             const ExperimentConfig& cfg, const CheckpointInfo& info) {
  std::filesystem::create_directories(dir);
  const auto tensors = dir / (name + ".tensors");
  rl::save_tensors(tensors, rl::agent_tensors(agent));
  const json manifest = {
      {"format", kManifestFormat},
      {"tensors", tensors.filename().string()},
      {"step", info.step},
      {"episode", info.episode},
      {"level", info.level},
      {"seed", info.seed},
      {"updates", agent.update_count()},
      {"obs_dim", agent.obs_dim()},
      {"act_dim", agent.act_dim()},
      {"config", to_json(cfg)},
  };
  const auto path = dir / (name + ".json");
  write_json(path, manifest);
  return path;
}

struct LoadedCheckpoint {
  ExperimentConfig config;
  Agent agent;
  CheckpointInfo info;
  std::filesystem::path manifest;
};

/// Accepts a manifest path or a run directory (uses its final checkpoint).
inline LoadedCheckpoint load_checkpoint(std::filesystem::path path) {
  if (std::filesystem::is_directory(path)) path = path / "checkpoints" / "final.json";
  std::ifstream is(path);
  if (!is) throw std::runtime_error("checkpoint not found: " + path.string());
  json m;
  try {
    m = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint manifest " + path.string() + ": " + e.what());
  }
  if (m.value("format", std::string{}) != kManifestFormat)
    throw std::runtime_error(path.string() + " is not a checkpoint manifest");
  LoadedCheckpoint out;
  out.config = config_from_json(m.at("config"));
  out.info.step = m.at("step").get<long>();
  out.info.episode = m.at("episode").get<long>();
  out.info.level = m.at("level").get<double>();
  out.info.seed = m.at("seed").get<std::uint64_t>();
  out.agent = make_agent(out.config, out.info.seed);
  rl::restore_agent(rl::load_tensors(path.parent_path() / m.at("tensors").get<std::string>()), out.agent);
  const long updates = m.at("updates").get<long>();
  out.agent.set_update_count(updates);
  out.agent.actor_optimizer().set_steps(updates);
  out.agent.critic_optimizer(0).set_steps(updates);
  out.agent.critic_optimizer(1).set_steps(updates);
  out.agent.alpha_optimizer().set_steps(updates);
  out.manifest = path;
  return out;
}

}  // namespace pegcl::harness
