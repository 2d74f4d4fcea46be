#include "ovmm/robot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace ovmm {
namespace {

Vec2 rotate(Vec2 v, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

void check_band(const char* joint, double delta, double lo, double hi) {
  const double mag = std::abs(delta);
  if (mag == 0.0) return;
  constexpr double kEps = 1e-9;
  if (mag < lo - kEps || mag > hi + kEps) {
    throw ActionError(fmt::format("{} delta {:.4f} exceeds per-step band [{:.3f}, {:.3f}]", joint,
                                  delta, lo, hi));
  }
}

double rotary_profile(double err, double current, double w_max, double acc, double dt) {
  const double mag = std::min({w_max, std::abs(current) + acc * dt, std::sqrt(2.0 * acc * std::abs(err)),
                               std::abs(err) / dt});
  return std::copysign(mag, err);
}

}  // namespace

std::string action_name(const Action& a) {
  struct Visitor {
    std::string operator()(const DiscreteMove& m) const {
      switch (m.kind) {
        case DiscreteMove::Kind::Forward:
          return "forward";
        case DiscreteMove::Kind::TurnLeft:
          return "turn_left";
        case DiscreteMove::Kind::TurnRight:
          return "turn_right";
        case DiscreteMove::Kind::Stop:
          return "stop";
      }
      return "stop";
    }
    std::string operator()(const Waypoint&) const { return "waypoint"; }
    std::string operator()(const JointDeltas&) const { return "joint_deltas"; }
    std::string operator()(const Grasp&) const { return "grasp"; }
    std::string operator()(const Release&) const { return "release"; }
    std::string operator()(const EnterManipulationMode&) const { return "manipulation_mode"; }
    std::string operator()(const SetHeadTilt&) const { return "head_tilt"; }
  };
  return std::visit(Visitor{}, a);
}

Vec3 end_effector_position(const Pose2& base, const Joints& joints) {
  const Vec2 arm = rotate({0.0, -(kArmBaseOffset + joints.arm_extension)}, base.yaw);
  return {base.x + arm.x, base.y + arm.y, joints.lift + kGripperAboveLift};
}

CameraPose camera_pose(const Pose2& base, const Joints& joints, const CameraModel& camera) {
  return {{base.x, base.y, camera.mount_height}, wrap_angle(base.yaw + joints.head_pan),
          joints.head_tilt};
}

std::pair<Vec2, bool> sweep_segment(const Scene& scene, Vec2 from, Vec2 to, double resolution) {
  const Vec2 d = to - from;
  const double len = d.norm();
  if (len == 0.0) return {from, false};
  const int n = static_cast<int>(std::ceil(len / resolution));
  Vec2 last = from;
  for (int i = 1; i <= n; ++i) {
    const Vec2 p = i == n ? to : from + (static_cast<double>(i) / n) * d;
    if (!scene.navigable(p)) return {last, true};
    last = p;
  }
  return {to, false};
}

RobotState apply_discrete(const RobotState& state, DiscreteMove action, const Scene& scene,
                          const ActionConfig& config) {
  if (state.mode != RobotMode::Navigation && action.kind != DiscreteMove::Kind::Stop) {
    throw ActionError("discrete navigation actions require navigation mode");
  }
  RobotState next = state;
  next.collided = false;
  ++next.step_count;
  switch (action.kind) {
    case DiscreteMove::Kind::Forward: {
      const Vec2 from = state.base.position();
      const Vec2 to = from + config.forward_step * Vec2{std::cos(state.base.yaw), std::sin(state.base.yaw)};
      const auto [reached, truncated] = sweep_segment(scene, from, to, config.sweep_resolution);
      next.base.x = reached.x;
      next.base.y = reached.y;
      next.collided = truncated;
      break;
    }
    case DiscreteMove::Kind::TurnLeft:
      next.base.yaw = wrap_angle(state.base.yaw + config.turn_increment);
      break;
    case DiscreteMove::Kind::TurnRight:
      next.base.yaw = wrap_angle(state.base.yaw - config.turn_increment);
      break;
    case DiscreteMove::Kind::Stop:
      next.stop_called = true;
      break;
  }
  return next;
}

RobotState apply_waypoint(const RobotState& state, const Waypoint& wp, const Scene& scene,
                          const ActionConfig& config) {
  if (state.mode != RobotMode::Navigation) {
    throw ActionError("waypoints require navigation mode");
  }
  const double dist = std::hypot(wp.dx, wp.dy);
  if (dist > config.max_waypoint + 1e-9) {
    throw ActionError(fmt::format("waypoint translation {:.3f} m exceeds {:.2f} m", dist,
                                  config.max_waypoint));
  }
  RobotState next = state;
  next.collided = false;
  ++next.step_count;
  const Vec2 from = state.base.position();
  const Vec2 to = from + rotate({wp.dx, wp.dy}, state.base.yaw);
  const auto [reached, truncated] = sweep_segment(scene, from, to, config.sweep_resolution);
  next.base.x = reached.x;
  next.base.y = reached.y;
  next.base.yaw = wrap_angle(state.base.yaw + wp.dyaw);
  next.collided = truncated;
  return next;
}

bool arm_intersects_scene(const Scene& scene, const Pose2& base, const Joints& joints) {
  const Vec3 ee = end_effector_position(base, joints);
  const Vec2 start = base.position();
  const Vec2 end = ee.xy();
  const double len = (end - start).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / 0.02)));
  for (int i = 0; i <= n; ++i) {
    const Vec2 p = start + (static_cast<double>(i) / n) * (end - start);
    for (const auto& w : scene.walls) {
      if (ee.z < kWallHeight && w.box().contains(p)) return true;
    }
    for (const auto& r : scene.receptacles) {
      if (ee.z < r.surface_height && r.footprint.contains(p)) return true;
    }
  }
  return false;
}

RobotState apply_joint_deltas(const RobotState& state, const JointDeltas& d, const Scene& scene,
                              const ActionConfig& config) {
  check_band("base_forward", d.base_forward, config.base_forward_min, config.base_forward_max);
  check_band("base_turn", d.base_turn, config.base_turn_min, config.base_turn_max);
  check_band("lift", d.lift, config.arm_min, config.arm_max);
  check_band("arm_extension", d.arm_extension, config.arm_min, config.arm_max);
  check_band("head_pan", d.head_pan, config.rotary_min, config.rotary_max);
  check_band("head_tilt", d.head_tilt, config.rotary_min, config.rotary_max);
  check_band("wrist_yaw", d.wrist_yaw, config.rotary_min, config.rotary_max);
  check_band("wrist_pitch", d.wrist_pitch, config.rotary_min, config.rotary_max);
  check_band("wrist_roll", d.wrist_roll, config.rotary_min, config.rotary_max);

  const bool arm_motion = d.lift != 0.0 || d.arm_extension != 0.0 || d.wrist_yaw != 0.0 ||
                          d.wrist_pitch != 0.0 || d.wrist_roll != 0.0 || d.gripper != 0.0;
  if (arm_motion && state.mode != RobotMode::Manipulation) {
    throw ActionError("arm joints can only move in manipulation mode");
  }
  if (d.base_turn != 0.0 && state.mode == RobotMode::Manipulation) {
    throw ActionError("base rotation is not allowed in manipulation mode");
  }

  RobotState next = state;
  next.collided = false;
  ++next.step_count;
  const JointLimits& lim = config.limits;
  Joints& j = next.joints;
  j.lift = std::clamp(j.lift + d.lift, lim.lift_min, lim.lift_max);
  j.arm_extension = std::clamp(j.arm_extension + d.arm_extension, lim.extension_min, lim.extension_max);
  j.head_pan = std::clamp(j.head_pan + d.head_pan, lim.pan_min, lim.pan_max);
  j.head_tilt = std::clamp(j.head_tilt + d.head_tilt, lim.tilt_min, lim.tilt_max);
  j.wrist_yaw = std::clamp(j.wrist_yaw + d.wrist_yaw, lim.wrist_min, lim.wrist_max);
  j.wrist_pitch = std::clamp(j.wrist_pitch + d.wrist_pitch, lim.wrist_min, lim.wrist_max);
  j.wrist_roll = std::clamp(j.wrist_roll + d.wrist_roll, lim.wrist_min, lim.wrist_max);
  j.gripper = std::clamp(j.gripper + d.gripper, 0.0, 1.0);

  next.base.yaw = wrap_angle(next.base.yaw + d.base_turn);
  if (d.base_forward != 0.0) {
    const Vec2 from = state.base.position();
    const Vec2 to = from + d.base_forward * Vec2{std::cos(state.base.yaw), std::sin(state.base.yaw)};
    const auto [reached, truncated] = sweep_segment(scene, from, to, config.sweep_resolution);
    next.base.x = reached.x;
    next.base.y = reached.y;
    next.collided = truncated;
  }
  if (next.mode == RobotMode::Manipulation && arm_intersects_scene(scene, next.base, next.joints)) {
    next.arm_collision = true;
  }
  return next;
}

RobotState enter_manipulation_mode(const RobotState& state) {
  if (state.mode == RobotMode::Manipulation || state.manipulation_used) {
    throw ActionError("manipulation mode can only be entered once per episode");
  }
  RobotState next = state;
  ++next.step_count;
  next.collided = false;
  next.mode = RobotMode::Manipulation;
  next.manipulation_used = true;
  next.base.yaw = wrap_angle(state.base.yaw + std::numbers::pi / 2);
  // Head turns toward the arm, which now points along the previous heading.
  next.joints.head_pan = -std::numbers::pi / 2;
  next.arm_collision = false;
  return next;
}

VelocityCommand velocity_controller_step(const Pose2& pose, const Pose2& goal,
                                         const VelocityLimits& lim, double dt,
                                         VelocityCommand current) {
  if (dt <= 0.0) throw Error("controller time step must be positive");
  const double dx = goal.x - pose.x;
  const double dy = goal.y - pose.y;
  const double dist = std::hypot(dx, dy);
  VelocityCommand cmd;
  if (dist > lim.position_tolerance) {
    const double err = wrap_angle(std::atan2(dy, dx) - pose.yaw);
    cmd.w = rotary_profile(err, current.w, lim.w_max, lim.acc_ang, dt);
    if (std::abs(err) > lim.heading_threshold) {
      cmd.v = 0.0;
    } else {
      cmd.v = std::min({lim.v_max, std::max(0.0, current.v) + lim.acc_lin * dt,
                        std::sqrt(2.0 * lim.acc_lin * dist), dist / dt});
    }
    return cmd;
  }
  const double yaw_err = wrap_angle(goal.yaw - pose.yaw);
  if (std::abs(yaw_err) > lim.yaw_tolerance) {
    cmd.w = rotary_profile(yaw_err, current.w, lim.w_max, lim.acc_ang, dt);
  }
  return cmd;
}

Pose2 integrate_unicycle(const Pose2& pose, VelocityCommand cmd, double dt) {
  return {pose.x + cmd.v * dt * std::cos(pose.yaw), pose.y + cmd.v * dt * std::sin(pose.yaw),
          wrap_angle(pose.yaw + cmd.w * dt)};
}

}  // namespace ovmm
