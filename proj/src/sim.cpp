#include "ovmm/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

namespace ovmm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double nearest_viewpoint(const std::vector<Viewpoint>& vps, Vec2 p) {
  double best = kInf;
  for (const auto& vp : vps) best = std::min(best, (vp.position - p).norm());
  return best;
}

Vec3 object_center(const ObjectInstance& o) {
  return {o.position.x, o.position.y, o.position.z + 0.5 * o.height};
}

Pose2 relative_pose(const Pose2& origin, const Pose2& p) {
  const double dx = p.x - origin.x;
  const double dy = p.y - origin.y;
  const double c = std::cos(origin.yaw);
  const double s = std::sin(origin.yaw);
  return {c * dx + s * dy, -s * dx + c * dy, wrap_angle(p.yaw - origin.yaw)};
}

}  // namespace

GraspOutcome snap_grasp(RobotState& state, std::vector<ObjectInstance>& objects,
                        const Episode& episode, const Frame& visible, const InstanceTable& table,
                        double pick_radius) {
  if (state.held_object) throw ActionError("grasp while already holding an object");
  GraspOutcome out;
  const Vec3 ee = end_effector_position(state.base, state.joints);
  double best = kInf;
  for (std::size_t j = 0; j < objects.size(); ++j) {
    const auto& o = objects[j];
    if (o.support == Support::Held || !episode.is_target(o.id)) continue;
    if (visible.count(table.object(j)) == 0) continue;
    out.target_visible = true;
    const double d = (object_center(o) - ee).norm();
    if (d < best) {
      best = d;
      out.object = j;
    }
  }
  if (!out.object) return out;
  out.distance = best;
  if (best > pick_radius) {
    out.object.reset();
    return out;
  }
  auto& o = objects[*out.object];
  o.support = Support::Held;
  o.receptacle_id.clear();
  o.position = ee;
  state.held_object = o.id;
  out.success = true;
  return out;
}

PlaceOutcome release_object(RobotState& state, const Scene& scene,
                            std::vector<ObjectInstance>& objects, double drop_tolerance) {
  if (!state.held_object) throw ActionError("release with an empty gripper");
  auto it = std::find_if(objects.begin(), objects.end(),
                         [&](const ObjectInstance& o) { return o.id == *state.held_object; });
  if (it == objects.end()) throw Error("held object is not part of the episode");
  const Vec3 ee = end_effector_position(state.base, state.joints);
  PlaceOutcome out;
  out.arm_collision = state.arm_collision || (state.mode == RobotMode::Manipulation &&
                                              arm_intersects_scene(scene, state.base, state.joints));
  it->position = {ee.x, ee.y, 0.0};
  it->support = Support::OnFloor;
  it->receptacle_id.clear();
  out.drop_height = ee.z;
  for (const auto& r : scene.receptacles) {
    if (!r.surface.contains(ee.xy())) continue;
    const double drop = ee.z - r.surface_height;
    if (drop > 0.0 && drop <= drop_tolerance) {
      it->position.z = r.surface_height;
      it->support = Support::OnReceptacle;
      it->receptacle_id = r.id;
      out.support = Support::OnReceptacle;
      out.receptacle_id = r.id;
      out.drop_height = drop;
    }
    break;
  }
  state.held_object.reset();
  return out;
}

Simulator::Simulator(const Scene& scene, const Episode& episode, SimConfig config,
                     std::uint64_t seed)
    : scene_(scene), episode_(episode), config_(std::move(config)), seed_(seed) {
  config_.noise.validate();
  objects_ = episode.objects;
  table_ = {scene.receptacles.size(), objects_.size()};
  state_.base = episode.robot_start;
  trace_.frame_pixels = config_.camera.pixels();

  for (std::size_t i = 0; i < scene.receptacles.size(); ++i) {
    const auto& r = scene.receptacles[i];
    if (r.category != episode.goal_receptacle_category) continue;
    goal_receptacles_.push_back(table_.receptacle(i));
    if (auto it = episode.viewpoints.find(r.id); it != episode.viewpoints.end()) {
      goal_viewpoints_.insert(goal_viewpoints_.end(), it->second.begin(), it->second.end());
    }
  }
  std::set<std::string> start_receptacles;
  for (const auto& id : episode.target_object_ids) {
    if (const auto* o = episode.find_object(id)) start_receptacles.insert(o->receptacle_id);
  }
  for (const auto& rid : start_receptacles) {
    if (auto it = episode.viewpoints.find(rid); it != episode.viewpoints.end()) {
      target_viewpoints_.insert(target_viewpoints_.end(), it->second.begin(), it->second.end());
    }
  }
  for (const auto& c : default_object_catalog().categories) object_vocabulary_.push_back(c.name);
  const auto recs = receptacle_category_names();
  receptacle_vocabulary_.assign(recs.begin(), recs.end());
  render();
}

void Simulator::render() {
  const auto boxes = build_world_boxes(scene_, objects_);
  frame_ = render_frame(boxes, config_.camera, camera_pose(state_.base, state_.joints, config_.camera));
}

LabelMap Simulator::ground_truth_labels() const {
  LabelMap labels;
  for (InstanceId id : std::set<InstanceId>(frame_.semantic.begin(), frame_.semantic.end())) {
    if (table_.is_receptacle(id)) {
      labels[id] = scene_.receptacles[table_.receptacle_index(id)].category;
    } else if (table_.is_object(id)) {
      labels[id] = objects_[table_.object_index(id)].category;
    }
  }
  return labels;
}

Observation Simulator::observe() const {
  Observation obs;
  obs.step = state_.step_count;
  obs.frame = frame_;
  obs.labels = ground_truth_labels();
  if (!config_.noise.is_ground_truth()) {
    Rng rng(derive_seed(seed_, fmt::format("perception/{}", state_.step_count)));
    apply_perception_noise(obs.frame, obs.labels, config_.noise, object_vocabulary_,
                           receptacle_vocabulary_, table_, rng);
  }
  obs.pose_rel_start = relative_pose(episode_.robot_start, state_.base);
  obs.joints = state_.joints;
  obs.mode = state_.mode;
  obs.holding = state_.held_object.has_value();
  obs.goal = {episode_.object_category, episode_.start_receptacle_category,
              episode_.goal_receptacle_category};
  return obs;
}

TraceStep Simulator::record(const std::string& action) const {
  TraceStep t;
  t.step = state_.step_count;
  t.action = action;
  t.base = state_.base;
  t.mode = state_.mode;
  t.collided = state_.collided;
  t.arm_collision = state_.arm_collision;
  t.holding = state_.held_object.has_value();
  const Vec2 p = state_.base.position();
  t.target_viewpoint_distance = nearest_viewpoint(target_viewpoints_, p);
  t.goal_viewpoint_distance = nearest_viewpoint(goal_viewpoints_, p);
  t.target_object_distance = kInf;
  for (std::size_t j = 0; j < objects_.size(); ++j) {
    const auto& o = objects_[j];
    if (!episode_.is_target(o.id)) continue;
    if (o.support != Support::Held) {
      t.target_pixels += static_cast<int>(frame_.count(table_.object(j)));
      t.target_object_distance = std::min(t.target_object_distance, (o.position.xy() - p).norm());
    }
    if (o.support == Support::OnReceptacle) {
      const auto* r = scene_.find_receptacle(o.receptacle_id);
      if (r && r->category == episode_.goal_receptacle_category) t.object_on_goal = true;
    }
  }
  t.goal_receptacle_distance = kInf;
  for (InstanceId id : goal_receptacles_) {
    t.goal_pixels += static_cast<int>(frame_.count(id));
    const auto& r = scene_.receptacles[table_.receptacle_index(id)];
    t.goal_receptacle_distance = std::min(t.goal_receptacle_distance, r.footprint.distance(p));
  }
  return t;
}

void Simulator::step(const Action& action) {
  RobotState next = state_;
  std::optional<GraspOutcome> grasp;
  std::optional<PlaceOutcome> place;
  auto objects = objects_;
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, DiscreteMove>) {
          next = apply_discrete(state_, a, scene_, config_.actions);
        } else if constexpr (std::is_same_v<T, Waypoint>) {
          next = apply_waypoint(state_, a, scene_, config_.actions);
        } else if constexpr (std::is_same_v<T, JointDeltas>) {
          next = apply_joint_deltas(state_, a, scene_, config_.actions);
        } else if constexpr (std::is_same_v<T, EnterManipulationMode>) {
          next = enter_manipulation_mode(state_);
        } else if constexpr (std::is_same_v<T, SetHeadTilt>) {
          const auto& lim = config_.actions.limits;
          next.joints.head_tilt = std::clamp(a.tilt, lim.tilt_min, lim.tilt_max);
          next.collided = false;
          ++next.step_count;
        } else if constexpr (std::is_same_v<T, Grasp>) {
          grasp = snap_grasp(next, objects, episode_, frame_, table_, config_.pick_radius);
          next.collided = false;
          ++next.step_count;
        } else if constexpr (std::is_same_v<T, Release>) {
          place = release_object(next, scene_, objects, config_.drop_tolerance);
          next.collided = false;
          ++next.step_count;
        }
      },
      action);

  state_ = std::move(next);
  objects_ = std::move(objects);
  if (state_.held_object) {
    for (auto& o : objects_) {
      if (o.id == *state_.held_object) o.position = end_effector_position(state_.base, state_.joints);
    }
  }
  render();

  TraceStep t = record(action_name(action));
  if (grasp) {
    t.grasp_attempt = true;
    t.grasp_success = grasp->success;
    t.grasp_target_visible = grasp->target_visible;
    t.grasp_distance = grasp->target_visible ? grasp->distance : kInf;
  }
  if (place) {
    t.release = true;
    t.release_arm_collision = place->arm_collision;
    if (place->support == Support::OnReceptacle) {
      const auto* r = scene_.find_receptacle(place->receptacle_id);
      t.released_on_goal = r && r->category == episode_.goal_receptacle_category;
    }
  }
  trace_.steps.push_back(std::move(t));
}

}  // namespace ovmm
