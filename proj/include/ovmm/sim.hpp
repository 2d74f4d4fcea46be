#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ovmm/render.hpp"
#include "ovmm/robot.hpp"
#include "ovmm/scene.hpp"

namespace ovmm {

struct GoalSpec {
  std::string object_category;
  std::string start_receptacle_category;
  std::string goal_receptacle_category;
  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

struct Observation {
  int step = 0;
  Frame frame;
  LabelMap labels;
  Pose2 pose_rel_start;
  Joints joints;
  RobotMode mode = RobotMode::Navigation;
  bool holding = false;
  GoalSpec goal;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct SimConfig {
  CameraModel camera;
  ActionConfig actions;
  PerceptionNoiseProfile noise;
  double pick_radius = 0.8;
  double drop_tolerance = 0.15;
};

/// Everything the metrics need from one simulator step, recorded after the
/// action has been applied. Pixel counts come from the ground-truth render.
struct TraceStep {
  int step = 0;
  std::string action;
  Pose2 base;
  RobotMode mode = RobotMode::Navigation;
  int target_pixels = 0;
  int goal_pixels = 0;
  double target_viewpoint_distance = 0.0;
  double goal_viewpoint_distance = 0.0;
  double target_object_distance = 0.0;
  double goal_receptacle_distance = 0.0;
  bool collided = false;
  bool arm_collision = false;

  bool grasp_attempt = false;
  bool grasp_success = false;
  bool grasp_target_visible = false;  // in the frame the agent acted on
  double grasp_distance = 0.0;        // end effector to nearest visible target

  bool release = false;
  bool released_on_goal = false;
  bool release_arm_collision = false;
  bool object_on_goal = false;  // a released target rests on a goal receptacle
  bool holding = false;
  friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

struct Trace {
  int frame_pixels = 0;
  std::vector<TraceStep> steps;
};

struct GraspOutcome {
  bool success = false;
  bool target_visible = false;
  std::optional<std::size_t> object;
  double distance = 0.0;
};

struct PlaceOutcome {
  Support support = Support::OnFloor;
  std::string receptacle_id;
  double drop_height = 0.0;
  bool arm_collision = false;
};

/// Picks the visible target nearest to the end effector when it is within
/// `pick_radius`. `visible` is the ground-truth frame the agent acted on.
GraspOutcome snap_grasp(RobotState& state, std::vector<ObjectInstance>& objects,
                        const Episode& episode, const Frame& visible, const InstanceTable& table,
                        double pick_radius);

/// Drops the held object below the end effector onto a receptacle surface
/// when the drop height is within (0, drop_tolerance], otherwise onto the floor.
PlaceOutcome release_object(RobotState& state, const Scene& scene,
                            std::vector<ObjectInstance>& objects, double drop_tolerance);

/// One episode's world: robot, objects, sensing and the metric trace.
class Simulator {
 public:
  Simulator(const Scene& scene, const Episode& episode, SimConfig config, std::uint64_t seed);

  /// Observation of the current state as the agent perceives it.
  Observation observe() const;

  /// Applies one action. Throws ActionError for invalid actions; the state is
  /// then unchanged and nothing is logged.
  void step(const Action& action);

  bool stopped() const { return state_.stop_called; }
  const RobotState& state() const { return state_; }
  const std::vector<ObjectInstance>& objects() const { return objects_; }
  const Frame& ground_truth() const { return frame_; }
  const Trace& trace() const { return trace_; }
  const Scene& scene() const { return scene_; }
  const Episode& episode() const { return episode_; }
  const SimConfig& config() const { return config_; }
  const InstanceTable& instances() const { return table_; }
  LabelMap ground_truth_labels() const;

 private:
  void render();
  TraceStep record(const std::string& action) const;

  const Scene& scene_;
  const Episode& episode_;
  SimConfig config_;
  std::uint64_t seed_;
  InstanceTable table_;
  RobotState state_;
  std::vector<ObjectInstance> objects_;
  Frame frame_;
  Trace trace_;
  std::vector<InstanceId> goal_receptacles_;
  std::vector<Viewpoint> target_viewpoints_;
  std::vector<Viewpoint> goal_viewpoints_;
  std::vector<std::string> object_vocabulary_;
  std::vector<std::string> receptacle_vocabulary_;
};

}  // namespace ovmm
