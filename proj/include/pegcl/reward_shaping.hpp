#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pegcl::reward {

struct RewardWeights {
  double position_velocity = 1.0;  // w1
  double force = 1.0;              // w2
  double event = 1.0;              // w3

  void validate() const {
    if (!(std::isfinite(position_velocity) && std::isfinite(force) && std::isfinite(event)))
      throw std::invalid_argument("reward weights must be finite");
    if (position_velocity < 0 || force < 0 || event < 0)
      throw std::invalid_argument("reward weights must be non-negative");
    if (position_velocity == 0 && force == 0 && event == 0)
      throw std::invalid_argument("at least one reward weight must be positive");
  }
};

enum class StepStatus { Completed, Collision, Otherwise };

inline void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

/// Position/velocity shaping term. Peaks at 1 at the goal at rest; for large
/// distance it pays for speed through (v/2)^2.
inline double reward_position_velocity(double x, double v) {
  require_unit(x, "normalized distance");
  require_unit(v, "normalized speed");
  const double half_v = 0.5 * v;
  return (1.0 - std::tanh(5.0 * x)) * (1.0 - v) + half_v * half_v;
}

/// Contact-force term: a decreasing sigmoid in the normalized force error.
inline double reward_force(double f) {
  require_unit(f, "normalized force error");
  return -1.0 / (1.0 + std::exp(-15.0 * f + 5.0));
}

inline double reward_event(StepStatus s) {
  switch (s) {
    case StepStatus::Completed: return 500.0;
    case StepStatus::Collision: return -200.0;
    case StepStatus::Otherwise: return -1.0;
  }
  return -1.0;
}

inline double reward_total(double x, double v, double f, StepStatus status, const RewardWeights& w) {
  return w.position_velocity * reward_position_velocity(x, v) + w.force * reward_force(f) +
         w.event * reward_event(status);
}

/// Curriculum-scaled reward: the full reward is only paid at level 1.
inline double reward_dynamic(double r, double level) {
  require_unit(level, "curriculum level");
  return r * level;
}

}  // namespace pegcl::reward
