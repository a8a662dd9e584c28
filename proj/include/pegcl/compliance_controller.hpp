#pragma once

// Parallel position-force controller. The policy picks the gains every outer
// step; the law itself is evaluated at the inner (tracker) rate.
//
//   x_c = S (Kp_x x_e + Kd_x dx_e + a_x) + (I - S)(Kp_f F_e + Ki_f int F_e dt)
//
// x_c is a Cartesian twist (m/s, rad/s): gains Kp_x are in 1/s and Kp_f in
// m/(N s). The caller integrates it over the tick and clamps the result.

#include "pegcl/common.hpp"
#include "pegcl/sim_world.hpp"

#include <stdexcept>

namespace pegcl::control {

inline constexpr int kActionDim = 24;
using Action = Eigen::Matrix<double, kActionDim, 1>;

struct ActionBounds {
  Vec6 kpx_lo = Vec6::Constant(5.0);
  Vec6 kpx_hi = Vec6::Constant(100.0);
  Vec6 kpf_lo = (Vec6() << 1e-4, 1e-4, 1e-4, 2e-3, 2e-3, 2e-3).finished();
  Vec6 kpf_hi = (Vec6() << 2e-2, 2e-2, 2e-2, 1e-1, 1e-1, 1e-1).finished();
  Vec6 ax_max = (Vec6() << 2e-3, 2e-3, 2e-3, kDegToRad, kDegToRad, kDegToRad).finished();
  // Kd_x = c_d Kp_x. With a twist command fed to a kinematic tracker the
  // derivative term is an algebraic velocity feedback; c_d * max(Kp_x) < 1
  // keeps it contractive.
  double derivative_ratio = 0.005;
  double integral_ratio = 0.5;    // Ki_f = c_i Kp_f
};

struct ControllerGains {
  Vec6 kp_x = Vec6::Zero();
  Vec6 kd_x = Vec6::Zero();
  Vec6 kp_f = Vec6::Zero();
  Vec6 ki_f = Vec6::Zero();
  Vec6 selection = Vec6::Ones();
  Vec6 residual = Vec6::Zero();  // a_x
};

struct ControllerState {
  Vec6 force_integral = Vec6::Zero();  // N s
  bool scheduling_active = false;
};

inline double affine(double a, double lo, double hi) { return lo + 0.5 * (a + 1.0) * (hi - lo); }

/// Action layout: [Kp_x(6) | Kp_f(6) | S(6) | a_x(6)], each in [-1, 1].
inline ControllerGains map_action(const Action& action, const ActionBounds& b) {
  if (!action.allFinite()) throw std::invalid_argument("non-finite action");
  const Action a = action.cwiseMax(-1.0).cwiseMin(1.0);
  ControllerGains g;
  for (int j = 0; j < 6; ++j) {
    g.kp_x[j] = affine(a[j], b.kpx_lo[j], b.kpx_hi[j]);
    g.kp_f[j] = affine(a[6 + j], b.kpf_lo[j], b.kpf_hi[j]);
    g.selection[j] = affine(a[12 + j], 0.0, 1.0);
    g.residual[j] = affine(a[18 + j], -b.ax_max[j], b.ax_max[j]);
  }
  g.kd_x = b.derivative_ratio * g.kp_x;
  g.ki_f = b.integral_ratio * g.kp_f;
  return g;
}

struct SchedulingParams {
  double threshold = 0.01;  // m
  double max_multiplier = 10.0;  // kn
};

/// Per-translation-axis gain multiplier min(threshold / |e|, kn) inside the
/// threshold, 1 outside.
inline double scheduling_multiplier(double error, const SchedulingParams& p) {
  const double e = std::abs(error);
  if (e >= p.threshold) return 1.0;
  if (e == 0.0) return p.max_multiplier;
  return std::min(p.threshold / e, p.max_multiplier);
}

inline Vec6 schedule_gains(const Vec6& kp_x, const Vec6& x_e, const SchedulingParams& p) {
  if (!(p.threshold > 0.0)) throw std::invalid_argument("scheduling threshold must be positive");
  Vec6 out = kp_x;
  for (int j = 0; j < 3; ++j) out[j] *= scheduling_multiplier(x_e[j], p);
  return out;
}

struct ControlOutput {
  Vec6 command;  // x_c
  ControllerState state;
};

inline constexpr double kDefaultIntegralLimit = 10.0;  // N s

inline ControlOutput control_step(const ControllerGains& g, const ControllerState& st, const Vec6& x_e,
                                  const Vec6& xdot_e, const Vec6& f_e, double dt,
                                  double integral_limit = kDefaultIntegralLimit) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  ControlOutput out;
  out.state = st;
  out.state.force_integral =
      (st.force_integral + f_e * dt).cwiseMax(-integral_limit).cwiseMin(integral_limit);
  const Vec6 position_branch =
      g.kp_x.cwiseProduct(x_e) + g.kd_x.cwiseProduct(xdot_e) + g.residual;
  const Vec6 force_branch = g.kp_f.cwiseProduct(f_e) + g.ki_f.cwiseProduct(out.state.force_integral);
  out.command = g.selection.cwiseProduct(position_branch) +
                (Vec6::Ones() - g.selection).cwiseProduct(force_branch);
  return out;
}

inline Vec6 clamp_command(const Vec6& x_c, const Vec6& limits) {
  if (!(limits.array() > 0.0).all()) throw std::invalid_argument("command limits must be positive");
  return x_c.cwiseMax(-limits).cwiseMin(limits);
}

/// Everything one inner tick needs besides the gains.
struct LoopSettings {
  double dt = 0.002;
  bool pid_scheduling = true;
  SchedulingParams scheduling{};
  double integral_limit = kDefaultIntegralLimit;
  Vec6 displacement_limit = (Vec6() << 5e-3, 5e-3, 5e-3, 5 * kDegToRad, 5 * kDegToRad, 5 * kDegToRad).finished();
  Vec6 goal_wrench = Vec6::Zero();  // F_g
};

/// Runs the controller for one tick and advances the world through the
/// tracker. Gain scheduling uses the error measured at this tick.
inline sim::WorldState control_tick(const sim::WorldState& w, const sim::Pose& goal, const ControllerGains& gains,
                                    ControllerState& state, const LoopSettings& s) {
  const Vec6 x_e = sim::pose_error(goal, w.peg_pose);
  Vec6 xdot_e;
  xdot_e << -w.linear_velocity, -w.angular_velocity;
  const Vec6 f_e = s.goal_wrench - w.sensed.as_vec6();

  ControllerGains g = gains;
  state.scheduling_active = false;
  if (s.pid_scheduling) {
    g.kp_x = schedule_gains(gains.kp_x, x_e, s.scheduling);
    state.scheduling_active = (g.kp_x.head<3>().array() != gains.kp_x.head<3>().array()).any();
  }
  const bool active = state.scheduling_active;
  ControlOutput out = control_step(g, state, x_e, xdot_e, f_e, s.dt, s.integral_limit);
  state = out.state;
  state.scheduling_active = active;
  const Vec6 displacement = clamp_command(out.command * s.dt, s.displacement_limit);
  return sim::step_inner(w, sim::displace(w.peg_pose, displacement), s.dt);
}

}  // namespace pegcl::control
