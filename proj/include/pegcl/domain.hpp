#pragma once

#include "pegcl/common.hpp"
#include "pegcl/geometry.hpp"

#include <json.hpp>

namespace pegcl {

/// One sampled task instance. Units follow the randomization table: offsets in
/// mm and degrees, clearance and tolerance in mm, stiffness as the simulator's
/// raw contact kp (smaller is stiffer).
struct DomainParams {
  Vec3 position_offset_mm = Vec3::Zero();
  Vec3 orientation_offset_deg = Vec3::Zero();
  ShapeKind shape = ShapeKind::Cylinder;
  double clearance_mm = 3.0;
  double epsilon_mm = 15.0;
  double friction = 1.0;
  double stiffness = 5.0e-4;
  double level_at_sample = 0.0;
};

inline constexpr double kGazeboKpSoft = 5.0e-4;
inline constexpr double kGazeboKpStiff = 1.0e-6;
inline constexpr double kPenaltyStiffnessSoft = 500.0;     // N/m
inline constexpr double kPenaltyStiffnessStiff = 10000.0;  // N/m

/// Affine, monotone map from the raw kp value onto penalty stiffness in N/m.
/// Soft end (5e-4) -> 500 N/m, stiff end (1e-6) -> 10000 N/m.
inline double penalty_stiffness(double gazebo_kp) {
  const double t = (kGazeboKpSoft - gazebo_kp) / (kGazeboKpSoft - kGazeboKpStiff);
  return kPenaltyStiffnessSoft + t * (kPenaltyStiffnessStiff - kPenaltyStiffnessSoft);
}

inline nlohmann::json to_json(const DomainParams& p) {
  return {
      {"position_offset_mm", {p.position_offset_mm.x(), p.position_offset_mm.y(), p.position_offset_mm.z()}},
      {"orientation_offset_deg",
       {p.orientation_offset_deg.x(), p.orientation_offset_deg.y(), p.orientation_offset_deg.z()}},
      {"shape", shape_name(p.shape)},
      {"clearance_mm", p.clearance_mm},
      {"epsilon_mm", p.epsilon_mm},
      {"friction", p.friction},
      {"stiffness", p.stiffness},
      {"level_at_sample", p.level_at_sample},
  };
}

}  // namespace pegcl
