#pragma once

// Quasi-static peg-in-hole world: a rate-limited rigid position tracker
// carrying a prism peg over a board with one fixtured hole. Contact is a
// penalty spring on sampled peg points with Coulomb friction.
//
// Frames: the board's top surface is the plane z = hole.center.z, the hole
// axis is +z through hole.center, and the peg pose is the pose of the center
// of the peg's bottom face (its tip). Full insertion puts the tip on the hole
// bottom with zero rotation.

#include "pegcl/common.hpp"
#include "pegcl/domain.hpp"
#include "pegcl/geometry.hpp"

#include <json.hpp>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pegcl::sim {

struct Pose {
  Vec3 position = Vec3::Zero();     // m
  Vec3 orientation = Vec3::Zero();  // rotation vector, rad
};

struct Wrench {
  Vec3 force = Vec3::Zero();   // N
  Vec3 torque = Vec3::Zero();  // N m

  Vec6 as_vec6() const {
    Vec6 v;
    v << force, torque;
    return v;
  }
  static Wrench from_vec6(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
};

struct HoleGeometry {
  Vec3 center = Vec3::Zero();  // center of the opening on the board surface
  double clearance = 3e-3;     // radial gap at the circumscribed radius, m
  double depth = 25e-3;        // m
  double chamfer = 0.5e-3;     // 45 degree lead-in, m
};

struct TrackerLimits {
  double max_linear_speed = 0.05;                // m/s, per axis
  double max_angular_speed = 45.0 * kDegToRad;  // rad/s, per axis
};

/// World constants that are not randomized per episode.
struct WorldConfig {
  double peg_radius = 10e-3;
  double peg_length = 40e-3;
  double hole_depth = 25e-3;
  double chamfer = 0.5e-3;
  double side_row_spacing = 4e-3;
  double sensor_noise_std = 0.0;  // N, additive on the force reading
  TrackerLimits limits{};
};

/// Precomputed outlines and contact sample points for one task.
struct TaskGeometry {
  std::vector<Vec2> hole_outline;      // nominal, at the hole wall below the chamfer
  std::vector<Vec3> peg_points;        // in the peg frame; bottom points first
  std::size_t bottom_point_count = 0;  // normalizes the per-point stiffness
  double hole_inscribed_radius = 0.0;
  double hole_outer_radius = 0.0;  // circumscribed radius of the nominal hole
};

struct WorldState {
  Pose peg_pose;
  Vec3 linear_velocity = Vec3::Zero();   // m/s
  Vec3 angular_velocity = Vec3::Zero();  // rad/s
  PegShape shape;
  double peg_length = 40e-3;
  HoleGeometry hole;
  Wrench contact;  // wrench applied by the environment on the peg
  Wrench sensed;   // F/T reading: wrench applied by the peg on the environment
  double env_stiffness = 500.0;  // N/m
  double env_friction = 1.0;
  double time = 0.0;                  // s
  double insertion_tolerance = 15e-3;  // epsilon, m
  TrackerLimits limits;
  double sensor_noise_std = 0.0;
  std::uint64_t noise_state = 0;
  std::shared_ptr<const TaskGeometry> geometry;

  Pose goal() const {
    return {hole.center - Vec3(0, 0, hole.depth), Vec3::Zero()};
  }
};

enum class Status { Running, Success, Collision, Stuck, Timeout };

inline std::string_view status_name(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Success: return "success";
    case Status::Collision: return "collision";
    case Status::Stuck: return "stuck";
    case Status::Timeout: return "timeout";
  }
  return "unknown";
}

inline Status parse_status(std::string_view s) {
  for (auto st : {Status::Running, Status::Success, Status::Collision, Status::Stuck, Status::Timeout})
    if (status_name(st) == s) return st;
  throw std::invalid_argument("unknown status: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Geometry construction

inline std::shared_ptr<const TaskGeometry> build_geometry(const PegShape& shape, double clearance,
                                                          double peg_length, double row_spacing) {
  auto g = std::make_shared<TaskGeometry>();
  const auto peg = outline(shape);
  const double hole_radius = shape.radius + clearance;
  g->hole_outline = unit_outline(shape.kind);
  for (auto& p : g->hole_outline) p *= hole_radius;
  g->hole_inscribed_radius = inscribed_radius(g->hole_outline);
  g->hole_outer_radius = hole_radius;

  // Bottom face: corners and edge midpoints.
  for (std::size_t i = 0; i < peg.size(); ++i) {
    const Vec2& a = peg[i];
    const Vec2& b = peg[(i + 1) % peg.size()];
    g->peg_points.emplace_back(a.x(), a.y(), 0.0);
    const Vec2 m = 0.5 * (a + b);
    g->peg_points.emplace_back(m.x(), m.y(), 0.0);
  }
  g->bottom_point_count = g->peg_points.size();
  // Lateral edges: corners sampled along the peg axis.
  const int rows = static_cast<int>(std::floor(peg_length / row_spacing + 1e-9));
  for (int r = 1; r <= rows; ++r) {
    const double h = r * row_spacing;
    for (const auto& a : peg) g->peg_points.emplace_back(a.x(), a.y(), h);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Contact

struct PointPenetration {
  double depth = 0.0;
  Vec3 normal = Vec3::UnitZ();  // out of the board material
};

/// Penetration of one world point (expressed relative to the hole center)
/// into the board solid.
inline PointPenetration penetration_at(const Vec3& q, const TaskGeometry& g, const HoleGeometry& hole) {
  PointPenetration out;
  const double z = q.z();
  if (z >= 0.0) return out;
  const Vec2 xy = q.head<2>();
  const double r_xy = xy.norm();

  // Chamfer widens the opening linearly with height: scale factor s(z).
  const double widen = std::max(0.0, hole.chamfer + z);
  const double scale = (g.hole_outer_radius + widen) / g.hole_outer_radius;

  const bool clearly_inside = r_xy < g.hole_inscribed_radius;
  const bool inside = clearly_inside || point_in_polygon(xy / scale, g.hole_outline);
  if (inside) {
    if (z < -hole.depth) {
      out.depth = -hole.depth - z;
      out.normal = Vec3::UnitZ();
    }
    return out;
  }

  const BoundaryQuery b = closest_on_boundary(xy / scale, g.hole_outline);
  const double d_h = b.distance * scale;
  Vec2 n_h = b.closest * scale - xy;
  const double n_len = n_h.norm();
  n_h = n_len > 0.0 ? Vec2(n_h / n_len) : Vec2(-xy / std::max(r_xy, 1e-12));

  const double d_top = -z;
  const bool in_chamfer_band = widen > 0.0;
  const double d_side = in_chamfer_band ? d_h / std::sqrt(2.0) : d_h;
  if (d_top <= d_side) {
    out.depth = d_top;
    out.normal = Vec3::UnitZ();
  } else {
    out.depth = d_side;
    if (in_chamfer_band) {
      out.normal = Vec3(n_h.x(), n_h.y(), 1.0) / std::sqrt(2.0);
    } else {
      out.normal = Vec3(n_h.x(), n_h.y(), 0.0);
    }
  }
  return out;
}

/// Penalty contact wrench on the peg, torque taken about the peg tip.
/// Per-point stiffness is env_stiffness / bottom_point_count so that a flat
/// face pressed uniformly by delta yields exactly env_stiffness * delta.
inline Wrench compute_contact(const WorldState& w) {
  Wrench out;
  if (!w.geometry) throw std::logic_error("world has no task geometry");
  const TaskGeometry& g = *w.geometry;
  const Mat3 rot = rotvec_to_matrix(w.peg_pose.orientation);
  const double k_point = w.env_stiffness / static_cast<double>(g.bottom_point_count);
  for (const auto& local : g.peg_points) {
    const Vec3 arm = rot * local;
    const Vec3 q = w.peg_pose.position + arm - w.hole.center;
    if (q.z() >= 0.0) continue;
    const PointPenetration pen = penetration_at(q, g, w.hole);
    if (pen.depth <= 0.0) continue;
    const double fn_mag = k_point * pen.depth;
    Vec3 f = fn_mag * pen.normal;
    const Vec3 v_point = w.linear_velocity + w.angular_velocity.cross(arm);
    const Vec3 v_t = v_point - v_point.dot(pen.normal) * pen.normal;
    const double speed = v_t.norm();
    if (speed > 1e-12) f -= w.env_friction * fn_mag * (v_t / speed);
    out.force += f;
    out.torque += arm.cross(f);
  }
  return out;
}

inline bool any_penetration(const Pose& pose, const WorldState& w) {
  const Mat3 rot = rotvec_to_matrix(pose.orientation);
  for (const auto& local : w.geometry->peg_points) {
    const Vec3 q = pose.position + rot * local - w.hole.center;
    if (q.z() >= 0.0) continue;
    if (penetration_at(q, *w.geometry, w.hole).depth > 0.0) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Sensor

inline double noise_uniform(std::uint64_t& state) {
  state = splitmix64(state);
  return static_cast<double>(state >> 11) * 0x1.0p-53;
}

inline double noise_normal(std::uint64_t& state) {
  double u1 = noise_uniform(state);
  const double u2 = noise_uniform(state);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline Wrench read_sensor(const Wrench& contact, double noise_std, std::uint64_t& state) {
  Wrench r{-contact.force, -contact.torque};
  if (noise_std > 0.0)
    for (int i = 0; i < 3; ++i) r.force[i] += noise_std * noise_normal(state);
  return r;
}

// ---------------------------------------------------------------------------
// Task construction

inline constexpr double kMaxOffsetMm = 50.0;
inline constexpr double kMaxOffsetDeg = 30.0;

/// Places the peg at the goal pose displaced by the sampled offsets. If that
/// pose interpenetrates the board, the peg is raised along +z to the lowest
/// contact-free height.
inline WorldState make_task(const DomainParams& params, std::uint64_t rng_seed,
                            const WorldConfig& cfg = {}) {
  if (!(params.clearance_mm > 0.0)) throw std::invalid_argument("clearance must be positive");
  for (int i = 0; i < 3; ++i) {
    if (!(std::abs(params.position_offset_mm[i]) <= kMaxOffsetMm))
      throw std::invalid_argument("position offset outside +/-50 mm envelope");
    if (!(std::abs(params.orientation_offset_deg[i]) <= kMaxOffsetDeg))
      throw std::invalid_argument("orientation offset outside +/-30 deg envelope");
  }
  if (!(params.friction >= 0.0)) throw std::invalid_argument("friction must be non-negative");
  if (!(params.epsilon_mm >= 0.0)) throw std::invalid_argument("epsilon must be non-negative");

  WorldState w;
  w.shape = {params.shape, cfg.peg_radius};
  w.peg_length = cfg.peg_length;
  w.hole.center = Vec3::Zero();
  w.hole.clearance = params.clearance_mm * kMm;
  w.hole.depth = cfg.hole_depth;
  w.hole.chamfer = cfg.chamfer;
  w.env_stiffness = penalty_stiffness(params.stiffness);
  if (!(w.env_stiffness > 0.0)) throw std::invalid_argument("stiffness maps to a non-positive value");
  w.env_friction = params.friction;
  w.insertion_tolerance = params.epsilon_mm * kMm;
  w.limits = cfg.limits;
  w.sensor_noise_std = cfg.sensor_noise_std;
  w.noise_state = splitmix64(rng_seed);
  w.geometry = build_geometry(w.shape, w.hole.clearance, cfg.peg_length, cfg.side_row_spacing);

  const Pose goal = w.goal();
  Pose start;
  start.position = goal.position + params.position_offset_mm * kMm;
  start.orientation = params.orientation_offset_deg * kDegToRad;

  if (any_penetration(start, w)) {
    double lo = 0.0;
    double hi = cfg.hole_depth + cfg.peg_radius + 0.06;
    Pose probe = start;
    probe.position.z() += hi;
    if (any_penetration(probe, w)) throw std::logic_error("cannot lift peg out of the board");
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      probe.position.z() = start.position.z() + mid;
      (any_penetration(probe, w) ? lo : hi) = mid;
    }
    start.position.z() += hi;
  }
  w.peg_pose = start;
  w.contact = {};
  w.sensed = {};
  w.time = 0.0;
  return w;
}

// ---------------------------------------------------------------------------
// Dynamics

/// Rotation vector e with exp(e) * R(from) = R(to).
inline Vec3 rotation_error(const Vec3& to, const Vec3& from) {
  if (to == from) return Vec3::Zero();
  return matrix_to_rotvec(rotvec_to_matrix(to) * rotvec_to_matrix(from).transpose());
}

/// Goal pose minus current pose: translation difference and rotation error.
inline Vec6 pose_error(const Pose& goal, const Pose& current) {
  Vec6 e;
  e << goal.position - current.position, rotation_error(goal.orientation, current.orientation);
  return e;
}

/// Applies a small 6-dof displacement (translation, world-frame rotation
/// vector) to a pose.
inline Pose displace(const Pose& p, const Vec6& delta) {
  Pose out = p;
  out.position += delta.head<3>();
  const Vec3 dr = delta.tail<3>();
  if (!dr.isZero(0.0))
    out.orientation = matrix_to_rotvec(rotvec_to_matrix(dr) * rotvec_to_matrix(p.orientation));
  return out;
}

/// One 500 Hz tick of the rigid tracker.
inline WorldState step_inner(const WorldState& w, const Pose& commanded, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  WorldState n = w;
  const double dp_max = w.limits.max_linear_speed * dt;
  const double dr_max = w.limits.max_angular_speed * dt;

  Vec3 dp = (commanded.position - w.peg_pose.position).cwiseMax(-dp_max).cwiseMin(dp_max);
  if (!dp.allFinite()) dp.setZero();
  Vec3 dr = rotation_error(commanded.orientation, w.peg_pose.orientation).cwiseMax(-dr_max).cwiseMin(dr_max);
  if (!dr.allFinite()) dr.setZero();

  n.peg_pose.position = w.peg_pose.position + dp;
  if (!dr.isZero(0.0))
    n.peg_pose.orientation = matrix_to_rotvec(rotvec_to_matrix(dr) * rotvec_to_matrix(w.peg_pose.orientation));
  n.linear_velocity = dp / dt;
  n.angular_velocity = dr / dt;
  n.time = w.time + dt;
  n.contact = compute_contact(n);
  n.sensed = read_sensor(n.contact, n.sensor_noise_std, n.noise_state);
  return n;
}

// ---------------------------------------------------------------------------
// Termination and observation

struct TerminationLimits {
  double force_limit = 50.0;                 // F_max, N
  double min_cumulative_reward = -500.0;     // R_min
  int max_steps = 1000;
  double success_distance = 1e-3;  // m
};

/// Lateral distance to the hole axis and remaining depth to full insertion.
struct InsertionError {
  double lateral = 0.0;
  double remaining = 0.0;  // positive above the goal
};

inline InsertionError insertion_error(const WorldState& w) {
  const Pose goal = w.goal();
  const Vec3 d = w.peg_pose.position - goal.position;
  return {d.head<2>().norm(), d.z()};
}

/// Success: the tip is within success_distance of the insertion axis segment
/// and no more than epsilon short of full insertion.
inline bool is_inserted(const WorldState& w, double success_distance = 1e-3) {
  const InsertionError e = insertion_error(w);
  const double below = std::max(0.0, -e.remaining);
  return std::hypot(e.lateral, below) < success_distance && e.remaining <= w.insertion_tolerance;
}

inline Status check_termination(const WorldState& w, const TerminationLimits& lim, double cumulative_reward,
                                int steps) {
  if (w.sensed.force.norm() > lim.force_limit) return Status::Collision;
  if (is_inserted(w, lim.success_distance)) return Status::Success;
  if (cumulative_reward < lim.min_cumulative_reward) return Status::Stuck;
  if (steps >= lim.max_steps) return Status::Timeout;
  return Status::Running;
}

struct NormalizationConstants {
  double position = 50e-3;                   // m
  double orientation = 30.0 * kDegToRad;     // rad
  double linear_velocity = 0.05;             // m/s
  double angular_velocity = 45.0 * kDegToRad;  // rad/s
  double force = 50.0;                       // N
  double torque = 5.0;                       // N m
};

/// Normalized observation channels, each component in [-1, 1].
struct RawObservation {
  Vec6 pose_error = Vec6::Zero();
  Vec6 velocity = Vec6::Zero();
  Vec6 wrench = Vec6::Zero();

  static constexpr int kSize = 18;
  Eigen::Matrix<double, kSize, 1> flatten() const {
    Eigen::Matrix<double, kSize, 1> v;
    v << pose_error, velocity, wrench;
    return v;
  }
};

inline RawObservation observe(const WorldState& w, const Pose& goal, const NormalizationConstants& norms) {
  if (!(norms.position > 0 && norms.orientation > 0 && norms.linear_velocity > 0 &&
        norms.angular_velocity > 0 && norms.force > 0 && norms.torque > 0))
    throw std::invalid_argument("normalization constants must be positive");
  RawObservation o;
  const Vec6 e = pose_error(goal, w.peg_pose);
  o.pose_error << e.head<3>() / norms.position, e.tail<3>() / norms.orientation;
  o.velocity << w.linear_velocity / norms.linear_velocity, w.angular_velocity / norms.angular_velocity;
  o.wrench << w.sensed.force / norms.force, w.sensed.torque / norms.torque;
  auto clamp1 = [](Vec6& v) { v = v.cwiseMax(-1.0).cwiseMin(1.0); };
  clamp1(o.pose_error);
  clamp1(o.velocity);
  clamp1(o.wrench);
  return o;
}

// ---------------------------------------------------------------------------
// Snapshots

inline nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Vec3 vec_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json to_json(const WorldState& w) {
  return {
      {"peg_pose", {{"position", vec_json(w.peg_pose.position)}, {"orientation", vec_json(w.peg_pose.orientation)}}},
      {"peg_velocity", {{"linear", vec_json(w.linear_velocity)}, {"angular", vec_json(w.angular_velocity)}}},
      {"shape", {{"kind", shape_name(w.shape.kind)}, {"radius", w.shape.radius}}},
      {"peg_length", w.peg_length},
      {"hole",
       {{"center", vec_json(w.hole.center)},
        {"clearance", w.hole.clearance},
        {"depth", w.hole.depth},
        {"chamfer", w.hole.chamfer}}},
      {"contact", {{"force", vec_json(w.contact.force)}, {"torque", vec_json(w.contact.torque)}}},
      {"sensed", {{"force", vec_json(w.sensed.force)}, {"torque", vec_json(w.sensed.torque)}}},
      {"env_stiffness", w.env_stiffness},
      {"env_friction", w.env_friction},
      {"time", w.time},
      {"insertion_tolerance", w.insertion_tolerance},
  };
}

}  // namespace pegcl::sim
