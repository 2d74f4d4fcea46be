#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ovmm/evaluation.hpp"
#include "ovmm/manipulation.hpp"
#include "ovmm/navigation.hpp"
#include "ovmm/semantic_map.hpp"
#include "ovmm/sim.hpp"

namespace ovmm {

/// Anything that maps observations to actions: the builtin heuristic agent
/// or a remote process speaking the wire protocol.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual void reset(const std::string& episode_id, const GoalSpec& goal, std::uint64_t seed) = 0;
  virtual Action act(const Observation& obs) = 0;
  /// Called once with the scored result; remote agents forward it.
  virtual void finish(const EpisodeResult&) {}
  /// Why the agent gave up, empty if it did not.
  virtual std::string failure() const { return {}; }
};

/// Emits Stop on every step.
class StopAgent final : public Agent {
 public:
  void reset(const std::string&, const GoalSpec&, std::uint64_t) override {}
  Action act(const Observation&) override { return DiscreteMove{DiscreteMove::Kind::Stop}; }
};

enum class SkillPhase { FindObject, Gaze, Grasp, FindReceptacle, Place, Done, Failed };
std::string to_string(SkillPhase p);

struct AgentConfig {
  ActionSpace action_space = ActionSpace::Discrete;
  CameraModel camera;
  MapConfig map;
  ActionConfig actions;
  NavGoalParams nav{1.0, 1, 0.25};
  PlannerParams planner;
  double stop_radius = 0.65;
  double obstacle_inflation = 0.25;
  int initial_spin = 12;
  int crop_padding = 20;
  double revisit_distance = 1.0;  // minimum novelty of a revisit goal once frontiers run out

  bool gaze_enabled = true;  // false skips straight from FindObject to Grasp
  double gaze_approach_range = 0.6;
  double grasp_reach = 0.75;
  int lost_frames = 20;
  int grasp_retries = 3;
  GripperGeometry gripper;
  GraspParams grasp;
  int cloud_upsample = 3;

  PlacementParams placement;
  double place_approach = 0.385;
  double place_clearance = 0.05;
  int settle_steps = 50;
};

/// The modular heuristic baseline: semantic mapping with frontier
/// exploration and FMM planning for FindObject/FindReceptacle, a centering
/// gaze, the top-down grasp heuristic as a gate for the snap grasp, and the
/// heuristic place pipeline.
class HeuristicAgent final : public Agent {
 public:
  explicit HeuristicAgent(AgentConfig config = {});

  void reset(const std::string& episode_id, const GoalSpec& goal, std::uint64_t seed) override;
  Action act(const Observation& obs) override;

  SkillPhase phase() const { return phase_; }
  const SemanticMap& map() const { return map_; }
  std::string failure() const override { return failure_; }
  const std::optional<NavGoalDecision>& last_decision() const { return decision_; }
  const AgentConfig& config() const { return config_; }

 private:
  enum class PlaceStep { Estimate, Face, Approach, Reestimate, Manipulate, Lift, Align, Extend, Release, Settle };

  std::optional<Action> step_phase(const Observation& obs);
  std::optional<Action> find_object(const Observation& obs);
  std::optional<Action> gaze(const Observation& obs);
  std::optional<Action> grasp(const Observation& obs);
  std::optional<Action> find_receptacle(const Observation& obs);
  std::optional<Action> place(const Observation& obs);

  /// Plans one navigation step; nullopt once the goal region is reached.
  std::optional<Action> navigate(const Observation& obs, TaskPhase phase);
  Action turn_in_place(bool left) const;
  void note_collision(const Observation& obs);
  bool label_visible(const Observation& obs, const std::string& category) const;

  AgentConfig config_;
  SemanticMap map_;
  BinaryGrid collisions_;
  GoalSpec goal_;
  std::uint64_t seed_ = 0;
  SkillPhase phase_ = SkillPhase::FindObject;
  std::string failure_;
  std::optional<NavGoalDecision> decision_;

  int spin_left_ = 0;
  std::optional<Pose2> last_pose_;
  double expected_advance_ = 0.0;
  bool last_blocked_ = false;
  double last_progress_ = 1.0;  // fraction of the last commanded advance achieved

  int lost_ = 0;
  int grasp_failures_ = 0;
  bool awaiting_grasp_ = false;
  bool approach_blocked_ = false;
  double turned_for_reach_ = 0.0;
  double last_reach_ = std::numeric_limits<double>::infinity();
  std::optional<InstanceId> target_id_;
  std::optional<Vec3> target_point_;

  PlaceStep place_step_ = PlaceStep::Estimate;
  Vec3 place_point_;
  int place_estimates_ = 0;
  int align_moves_ = 0;
  int place_retries_ = 0;
  int settle_left_ = 0;
};

struct EpisodeRun {
  Trace trace;
  EpisodeResult result;
};

/// Sees each observation and the chosen action before the simulator applies it.
using StepObserver = std::function<void(const Observation&, const Action&, const Simulator&)>;

/// Runs observation -> action until the agent stops, an error ends the
/// episode, or the profile's step limit is reached, then scores the trace.
EpisodeRun run_episode(const Scene& scene, const Episode& episode, Agent& agent,
                       const SimConfig& sim_config, const MetricProfile& profile,
                       std::uint64_t seed, const StepObserver& observer = {});

/// Points of the instances labelled `category`, densified by bilinear depth
/// interpolation between neighbouring mask pixels (`upsample` samples per
/// pixel side). Map-frame coordinates.
PointCloud category_cloud(const Observation& obs, const std::string& category, const Pose2& pose,
                          const CameraModel& camera, int upsample = 1,
                          std::optional<InstanceId> only = std::nullopt);

}  // namespace ovmm
