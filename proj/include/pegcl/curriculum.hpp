#pragma once

// Difficulty-level bookkeeping and level-conditioned domain randomization.
//
// Every randomized parameter is described by its easiest and hardest value.
// A difficulty level L in [0, 1] exposes the sub-range
//   [easy, easy + (hard - easy) * L]
// and the sampling strategy draws inside it (uniform) or draws a difficulty
// u ~ N(L, sigma^2) truncated to [0, 1] and maps it through the full range
// (Gaussian).

#include "pegcl/common.hpp"
#include "pegcl/domain.hpp"
#include "pegcl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pegcl::curriculum {

enum class ParamKind { Continuous, Discrete };

struct ParamSpec {
  std::string name;
  double easy = 0.0;  // psi_low
  double hard = 1.0;  // psi_high
  ParamKind kind = ParamKind::Continuous;
  std::vector<std::string> choices;  // Discrete only, ordered easy -> hard
  std::string unit;

  void validate() const {
    if (kind == ParamKind::Continuous) {
      if (!(std::isfinite(easy) && std::isfinite(hard))) throw std::invalid_argument(name + ": non-finite bounds");
      if (easy == hard) throw std::invalid_argument(name + ": easy and hard values coincide");
    } else if (choices.empty()) {
      throw std::invalid_argument(name + ": discrete spec without choices");
    }
  }
};

/// Unordered interval; lo is always the easy end.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double min() const { return std::min(lo, hi); }
  double max() const { return std::max(lo, hi); }
  bool contains(double v) const { return v >= min() && v <= max(); }
};

enum class RangeForm {
  Interpolated,  // [easy, easy + (hard - easy) L]
  Literal,       // [easy, easy + hard L], as the formula is printed
};

inline void require_level(double level) {
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("curriculum level must lie in [0, 1]");
}

inline Interval param_range_at_level(const ParamSpec& spec, double level,
                                     RangeForm form = RangeForm::Interpolated) {
  require_level(level);
  if (spec.kind == ParamKind::Discrete) {
    // Index range of the unlocked prefix.
    const double n = static_cast<double>(spec.choices.size());
    const double count = std::max(1.0, std::ceil(level * n - 1e-9));
    return {0.0, count - 1.0};
  }
  if (form == RangeForm::Literal) return {spec.easy, spec.easy + spec.hard * level};
  return {spec.easy, spec.easy + (spec.hard - spec.easy) * level};
}

/// Number of discrete choices unlocked at a level (at least one).
inline std::size_t unlocked_count(const ParamSpec& spec, double level) {
  return static_cast<std::size_t>(param_range_at_level(spec, level).hi) + 1;
}

inline double sample_udr(const Interval& range, Rng& rng) {
  if (range.lo == range.hi) return range.lo;
  return range.lo + (range.hi - range.lo) * uniform01(rng);
}

inline constexpr int kGdrMaxAttempts = 64;

/// Difficulty draw u ~ N(level, sigma^2), resampled until it falls in [0, 1];
/// clamped after kGdrMaxAttempts misses.
inline double sample_gdr(double level, double sigma, Rng& rng) {
  require_level(level);
  if (!(sigma > 0.0)) throw std::invalid_argument("GDR sigma must be positive");
  double u = level;
  for (int i = 0; i < kGdrMaxAttempts; ++i) {
    u = level + sigma * standard_normal(rng);
    if (u >= 0.0 && u <= 1.0) return u;
  }
  return std::clamp(u, 0.0, 1.0);
}

/// Value of a continuous spec at difficulty u (full-range interpolation).
inline double value_at_difficulty(const ParamSpec& spec, double u) {
  return spec.easy + (spec.hard - spec.easy) * u;
}

inline std::size_t index_at_difficulty(const ParamSpec& spec, double u) {
  const std::size_t n = spec.choices.size();
  return std::min(n - 1, static_cast<std::size_t>(std::floor(u * static_cast<double>(n))));
}

enum class Strategy { Uniform, Gaussian };

struct SamplingOptions {
  double sigma = 0.1;
  bool shared_difficulty = false;  // one u drives every parameter (Gaussian only)
  RangeForm range_form = RangeForm::Interpolated;
};

// Registry names.
inline constexpr const char* kPositionOffset = "position_offset";
inline constexpr const char* kOrientationOffset = "orientation_offset";
inline constexpr const char* kPegShape = "peg_shape";
inline constexpr const char* kClearance = "clearance";
inline constexpr const char* kEpsilon = "epsilon";
inline constexpr const char* kFriction = "friction";
inline constexpr const char* kStiffness = "stiffness";

/// Randomization table. Offsets are magnitudes (per axis) with a random sign;
/// the vertical offset is always upward. Stiffness holds the raw simulator kp.
inline std::vector<ParamSpec> default_registry() {
  return {
      {kPositionOffset, 0.0, 50.0, ParamKind::Continuous, {}, "mm"},
      {kOrientationOffset, 0.0, 30.0, ParamKind::Continuous, {}, "deg"},
      {kPegShape, 0.0, 0.0, ParamKind::Discrete, {"cylinder", "cuboid", "hexagon", "triangle"}, ""},
      {kClearance, 3.0, 0.5, ParamKind::Continuous, {}, "mm"},
      {kEpsilon, 15.0, 1.0, ParamKind::Continuous, {}, "mm"},
      {kFriction, 1.0, 5.0, ParamKind::Continuous, {}, ""},
      {kStiffness, 5.0e-4, 1.0e-6, ParamKind::Continuous, {}, "gazebo kp"},
  };
}

inline const ParamSpec& find_spec(const std::vector<ParamSpec>& registry, const std::string& name) {
  for (const auto& s : registry)
    if (s.name == name) return s;
  throw std::invalid_argument("randomization registry is missing '" + name + "'");
}

namespace detail {

struct Drawer {
  double level;
  Strategy strategy;
  const SamplingOptions& opts;
  Rng& rng;
  std::optional<double> shared_u;

  double difficulty() {
    if (opts.shared_difficulty) {
      if (!shared_u) shared_u = sample_gdr(level, opts.sigma, rng);
      return *shared_u;
    }
    return sample_gdr(level, opts.sigma, rng);
  }

  double continuous(const ParamSpec& spec) {
    if (strategy == Strategy::Uniform) return sample_udr(param_range_at_level(spec, level, opts.range_form), rng);
    return value_at_difficulty(spec, difficulty());
  }

  std::size_t discrete(const ParamSpec& spec) {
    if (strategy == Strategy::Uniform) {
      const std::size_t count = unlocked_count(spec, level);
      if (count == 1) return 0;
      return std::min(count - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(count)));
    }
    return index_at_difficulty(spec, difficulty());
  }

  double signed_magnitude(const ParamSpec& spec) {
    const double m = continuous(spec);
    const bool negative = uniform01(rng) < 0.5;
    return (negative && m != 0.0) ? -m : m;
  }
};

}  // namespace detail

inline DomainParams sample_domain(const std::vector<ParamSpec>& registry, double level, Strategy strategy, Rng& rng,
                                  const SamplingOptions& opts = {}) {
  require_level(level);
  const ParamSpec& pos = find_spec(registry, kPositionOffset);
  const ParamSpec& rot = find_spec(registry, kOrientationOffset);
  const ParamSpec& shape = find_spec(registry, kPegShape);
  const ParamSpec& clearance = find_spec(registry, kClearance);
  const ParamSpec& epsilon = find_spec(registry, kEpsilon);
  const ParamSpec& friction = find_spec(registry, kFriction);
  const ParamSpec& stiffness = find_spec(registry, kStiffness);

  detail::Drawer d{level, strategy, opts, rng, std::nullopt};
  DomainParams p;
  p.position_offset_mm.x() = d.signed_magnitude(pos);
  p.position_offset_mm.y() = d.signed_magnitude(pos);
  p.position_offset_mm.z() = std::abs(d.continuous(pos));
  for (int i = 0; i < 3; ++i) p.orientation_offset_deg[i] = d.signed_magnitude(rot);
  p.shape = parse_shape(shape.choices.at(d.discrete(shape)));
  p.clearance_mm = d.continuous(clearance);
  p.epsilon_mm = d.continuous(epsilon);
  p.friction = d.continuous(friction);
  p.stiffness = d.continuous(stiffness);
  p.level_at_sample = level;
  return p;
}

// ---------------------------------------------------------------------------
// Level schedules

inline double linear_level(long episode, long episode_max) {
  if (episode < 0) throw std::invalid_argument("episode must be non-negative");
  if (episode_max <= 0) throw std::invalid_argument("episode_max must be positive");
  return std::min(static_cast<double>(episode) / static_cast<double>(episode_max), 1.0);
}

struct CurriculumState {
  double level = 0.1;
  int perf = 0;
  double step = 0.05;
  int thld_up = 4;
  int thld_down = -4;

  void validate() const {
    require_level(level);
    if (!(step > 0.0)) throw std::invalid_argument("curriculum step must be positive");
    if (!(thld_up > 0 && thld_down < 0)) throw std::invalid_argument("curriculum thresholds must straddle zero");
  }
};

/// Performance counter update: +1 per success, -1 per failure; crossing a
/// threshold moves the level by one step and resets the counter.
inline CurriculumState adaptive_update(CurriculumState s, bool success) {
  s.perf += success ? 1 : -1;
  if (s.perf >= s.thld_up) {
    s.level += s.step;
    s.perf = 0;
  } else if (s.perf <= s.thld_down) {
    s.level -= s.step;
    s.perf = 0;
  }
  s.level = std::clamp(s.level, 0.0, 1.0);
  return s;
}

}  // namespace pegcl::curriculum
