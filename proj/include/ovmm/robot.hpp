#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ovmm/camera.hpp"
#include "ovmm/common.hpp"
#include "ovmm/scene.hpp"

namespace ovmm {

enum class RobotMode { Navigation, Manipulation };

struct JointLimits {
  double lift_min = 0.0;
  double lift_max = 1.1;
  double extension_min = 0.0;
  double extension_max = 0.52;
  double tilt_min = -std::numbers::pi / 2;
  double tilt_max = std::numbers::pi / 4;
  double pan_min = -std::numbers::pi;
  double pan_max = std::numbers::pi / 2;
  double wrist_min = -std::numbers::pi;
  double wrist_max = std::numbers::pi;
};

struct Joints {
  double lift = 0.6;
  double arm_extension = 0.0;
  double head_pan = 0.0;
  double head_tilt = -0.5;
  double wrist_yaw = 0.0;
  double wrist_pitch = -std::numbers::pi / 2;
  double wrist_roll = 0.0;
  double gripper = 1.0;  // 1 = open
  friend bool operator==(const Joints&, const Joints&) = default;
};

struct RobotState {
  Pose2 base;
  Joints joints;
  RobotMode mode = RobotMode::Navigation;
  std::optional<std::string> held_object;
  int step_count = 0;
  bool stop_called = false;
  bool collided = false;          // last base motion was truncated
  bool manipulation_used = false;  // manipulation mode entered this episode
  bool arm_collision = false;      // arm touched scene since entering manipulation mode
};

// ---- Actions --------------------------------------------------------------

struct DiscreteMove {
  enum class Kind { Forward, TurnLeft, TurnRight, Stop };
  Kind kind = Kind::Stop;
  friend bool operator==(const DiscreteMove&, const DiscreteMove&) = default;
};

/// Teleporting base motion expressed in the robot frame (x forward, y left).
struct Waypoint {
  double dx = 0.0;
  double dy = 0.0;
  double dyaw = 0.0;
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

struct JointDeltas {
  double base_forward = 0.0;
  double base_turn = 0.0;
  double lift = 0.0;
  double arm_extension = 0.0;
  double head_pan = 0.0;
  double head_tilt = 0.0;
  double wrist_yaw = 0.0;
  double wrist_pitch = 0.0;
  double wrist_roll = 0.0;
  double gripper = 0.0;
  friend bool operator==(const JointDeltas&, const JointDeltas&) = default;
};

struct Grasp {
  friend bool operator==(const Grasp&, const Grasp&) = default;
};
struct Release {
  friend bool operator==(const Release&, const Release&) = default;
};
struct EnterManipulationMode {
  friend bool operator==(const EnterManipulationMode&, const EnterManipulationMode&) = default;
};
struct SetHeadTilt {
  double tilt = 0.0;
  friend bool operator==(const SetHeadTilt&, const SetHeadTilt&) = default;
};

using Action = std::variant<DiscreteMove, Waypoint, JointDeltas, Grasp, Release,
                            EnterManipulationMode, SetHeadTilt>;

std::string action_name(const Action& a);
inline bool is_stop(const Action& a) {
  const auto* m = std::get_if<DiscreteMove>(&a);
  return m && m->kind == DiscreteMove::Kind::Stop;
}

struct ActionConfig {
  double forward_step = 0.25;
  double turn_increment = 30.0 * std::numbers::pi / 180.0;
  double max_waypoint = 2.0;
  // Per-step bands for joint deltas; nonzero magnitudes outside [min, max] are rejected.
  double base_forward_min = 0.10;
  double base_forward_max = 0.25;
  double base_turn_min = 5.0 * std::numbers::pi / 180.0;
  double base_turn_max = 30.0 * std::numbers::pi / 180.0;
  double arm_min = 0.02;
  double arm_max = 0.10;
  double rotary_min = 0.02;
  double rotary_max = 0.10;
  double sweep_resolution = 0.01;
  JointLimits limits;
};

// ---- Kinematics -----------------------------------------------------------

inline constexpr double kArmBaseOffset = 0.20;
inline constexpr double kGripperAboveLift = 0.05;

/// End-effector world position. The arm points along the robot's right-hand
/// side, so after the 90 degree manipulation turn it faces the original heading.
Vec3 end_effector_position(const Pose2& base, const Joints& joints);

CameraPose camera_pose(const Pose2& base, const Joints& joints, const CameraModel& camera);

// ---- Simulation primitives ------------------------------------------------

/// Moves along the straight segment from the current pose towards `target`,
/// stopping at the last navigable sample. Returns the reached position and
/// whether the motion was truncated.
std::pair<Vec2, bool> sweep_segment(const Scene& scene, Vec2 from, Vec2 to, double resolution);

RobotState apply_discrete(const RobotState& state, DiscreteMove action, const Scene& scene,
                          const ActionConfig& config = {});
RobotState apply_waypoint(const RobotState& state, const Waypoint& waypoint, const Scene& scene,
                          const ActionConfig& config = {});
RobotState apply_joint_deltas(const RobotState& state, const JointDeltas& deltas,
                              const Scene& scene, const ActionConfig& config = {});
RobotState enter_manipulation_mode(const RobotState& state);

/// True when any point of the arm (from the mast to the gripper) lies inside scene geometry.
bool arm_intersects_scene(const Scene& scene, const Pose2& base, const Joints& joints);

struct VelocityLimits {
  double v_max = 0.3;
  double w_max = 1.0;
  double acc_lin = 0.3;
  double acc_ang = 1.0;
  double position_tolerance = 0.05;
  double yaw_tolerance = 0.05;
  double heading_threshold = 0.3;  // rotate in place above this heading error
};

struct VelocityCommand {
  double v = 0.0;
  double w = 0.0;
  friend bool operator==(const VelocityCommand&, const VelocityCommand&) = default;
};

/// Goto controller: face the goal while driving to it with a trapezoidal
/// speed profile, then rotate to the goal yaw. `current` is the command from
/// the previous tick and bounds the acceleration.
VelocityCommand velocity_controller_step(const Pose2& pose, const Pose2& goal,
                                         const VelocityLimits& limits, double dt,
                                         VelocityCommand current = {});

/// Unicycle integration of a velocity command.
Pose2 integrate_unicycle(const Pose2& pose, VelocityCommand cmd, double dt);

}  // namespace ovmm
